"""
Partition functions of a single field
=====================================

A field is a seed and a disorder law.  Every site value is a pure function
of (seed, n, x), so a field never has to be stored.
"""

import itertools
import math

import numpy as np

from dprelab import EnvironmentSpec, FieldHandle, log_partition, polymer_marginals
from dprelab.transfer import sample_path

# Gaussian disorder, seed 1
h = FieldHandle(1, EnvironmentSpec("gaussian-unit"))
beta, N = 0.8, 10

# The transfer sweep against a direct sum over all 2^N walk paths.
steps = np.array(list(itertools.product((-1, 1), repeat=N)))
paths = np.cumsum(steps, axis=1)
ns = np.broadcast_to(np.arange(1, N + 1), paths.shape)
z = h.zetas(beta, ns.ravel(), paths.ravel()).reshape(paths.shape)
brute = math.log(np.prod(z, axis=1).mean())
print(f"log W  sweep {log_partition(h, beta, N):.15f}  enumeration {brute:.15f}")

# Long horizons stay finite: each level is rescaled by a power of two.
for N_long in (1_000, 10_000, 50_000):
    print(f"N = {N_long:6d}  (1/N) log W = {log_partition(h, beta, N_long) / N_long:+.5f}")

# Forward and backward passes give the polymer marginals; drawing paths
# uses the forward weights backwards from the endpoint.
m = polymer_marginals(h, beta, 40)
mid = m.marginal(20)
print("most likely midpoint", m.sites(20)[np.argmax(mid)], "with probability", round(mid.max(), 4))
draws = sample_path(m, rng=np.random.default_rng(0), size=5)
print("five polymer endpoints:", draws[:, -1])
