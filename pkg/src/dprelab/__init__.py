"""Lattice directed polymers in random environment: exact transfer sweeps,
free-energy brackets, chaos expansions, coarse graining and the
intermediate-disorder route to the continuum polymer."""

__version__ = "0.1.0"

from .env_field import EnvironmentSpec, FieldHandle, cumulant, collision_exponent, make_spec
from .transfer import log_partition, polymer_marginals, second_moment_exact, chaos_decompose
from .free_energy import beta_sweep, estimate_free_energy, fractional_upper
from .continuum_scaling import IntermediateConfig, continuum_free_energy, second_moment_series
from .kernels import heat_kernel, srw_kernel, verify_identity

__all__ = [
    "EnvironmentSpec", "FieldHandle", "cumulant", "collision_exponent", "make_spec",
    "log_partition", "polymer_marginals", "second_moment_exact", "chaos_decompose",
    "beta_sweep", "estimate_free_energy", "fractional_upper",
    "IntermediateConfig", "continuum_free_energy", "second_moment_series",
    "heat_kernel", "srw_kernel", "verify_identity",
]
