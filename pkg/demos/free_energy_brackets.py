"""
Bracketing the free energy
==========================

The replica mean of (1/N) log W sits below the free energy; the
fractional-moment block statistic sits above it.  Both are shown at a
moderate coupling, together with the ratio to beta^4.
"""

from dprelab import EnvironmentSpec, estimate_free_energy, fractional_upper
from dprelab.free_energy import beta_sweep, default_N

spec = EnvironmentSpec()
beta = 0.5

low = estimate_free_energy(spec, beta, default_N(beta, 25), replicas=32, seed=1)
print(f"lower: {low.mean:.5f} +- {low.std_error:.5f}   ratio {low.mean / beta ** 4:.3f}")

up = fractional_upper(spec, beta, theta=0.5, T=4, n=64, replicas=64, seed=2)
print(f"upper: {up.value:.5f} +- {up.std_error:.5f}   (jackknife bias {up.jackknife_bias:+.1e})")

# A short sweep of the ratio F / beta^4; the horizon grows like beta^-4.
for row in beta_sweep(spec, [0.9, 0.7, 0.6], 25.0, replicas=32, seed=3):
    e = row.estimate
    print(f"beta {e.beta:.2f}  N {e.N:5d}  ratio {row.ratio:+.4f}  ci {row.ratio_ci[0]:+.4f} .. {row.ratio_ci[1]:+.4f}")
