"""Monte Carlo brackets for the quenched free energy.

The lower bracket is the replica mean of (1/N) log W_{beta,N}; since the
free energy is the supremum over N of (1/N) Q[log W_N], this mean
estimates a quantity below F(beta).  The upper bracket is the one-level
coarse-graining statistic built from fractional moments of block-restricted
partition functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np

from . import _lattice
from ._rng import stream_seed
from .coarse_grain import deterministic_block_powers, max_block_powers, reachable_blocks
from .env_field import EnvironmentSpec, FieldHandle
from .errors import ConfigError, DomainError

DEFAULT_MULTIPLIER = 100.0


@dataclass
class FreeEnergyEstimate:
    beta: float
    N: int
    replicas: int
    mean: float
    std_error: float
    seed: int
    samples: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def ci95(self):
        h = 1.96 * self.std_error
        return (self.mean - h, self.mean + h)

    def to_dict(self):
        lo, hi = self.ci95
        return {"beta": self.beta, "N": self.N, "replicas": self.replicas, "mean": self.mean,
                "std_error": self.std_error, "ci_lo": lo, "ci_hi": hi, "seed": self.seed}


def replica_log_partitions(spec: EnvironmentSpec, beta: float, N: int, seed: int,
                           start: int = 0, count: int = 1, x0: int = 0) -> np.ndarray:
    """log W_{beta,N} for replicas start .. start + count - 1 of master ``seed``."""
    if beta == 0:
        return np.zeros(count)
    seeds = _lattice.replica_seeds(np.uint64(seed), int(start), int(count))
    args = FieldHandle(0, spec).kernel_args(beta)[1:]
    return _lattice.log_partition_batch(seeds, *args, 0, int(x0), int(N))


def summarize_free_energy(values: np.ndarray, beta: float, N: int, seed: int) -> FreeEnergyEstimate:
    """Aggregate per-replica (1/N) log W values, in replica order."""
    v = np.asarray(values, dtype=float)
    R = v.size
    mean = float(np.sum(v) / R)
    se = float(np.std(v, ddof=1) / math.sqrt(R)) if R > 1 else math.inf
    return FreeEnergyEstimate(float(beta), int(N), R, mean, se, int(seed), v)


def estimate_free_energy(spec: EnvironmentSpec, beta: float, N: int, replicas: int,
                         seed: int) -> FreeEnergyEstimate:
    """Replica mean and standard error of (1/N) log W_{beta,N}."""
    if N < 1:
        raise DomainError("need N >= 1")
    if replicas < 2:
        raise DomainError("need at least 2 replicas")
    lw = replica_log_partitions(spec, beta, N, seed, 0, replicas)
    return summarize_free_energy(lw / N, beta, N, seed)


# ------------------------------------------------------------- sweeps

Schedule = Union[None, float, Mapping[float, int], Callable[[float], int]]


def default_N(beta: float, multiplier: float = DEFAULT_MULTIPLIER) -> int:
    return int(math.ceil(multiplier * beta ** -4))


def resolve_schedule(betas: Sequence[float], schedule: Schedule = None, min_multiplier: float = 1.0):
    """Lattice sizes for each beta, checked against N >= c beta^-4.

    ``schedule`` may be None (default multiplier), a number (the
    multiplier), a mapping beta -> N, or a callable.
    """
    Ns = []
    for b in betas:
        if schedule is None:
            N = default_N(b)
        elif callable(schedule):
            N = int(schedule(b))
        elif isinstance(schedule, Mapping):
            if b not in schedule:
                raise ConfigError(f"no lattice size given for beta={b}", field="N_of_beta")
            N = int(schedule[b])
        else:
            N = default_N(b, float(schedule))
        if b != 0 and N < min_multiplier * b ** -4:
            raise ConfigError(
                f"N={N} at beta={b} is below {min_multiplier} * beta^-4 = {min_multiplier * b ** -4:.1f}",
                field=f"N_of_beta[{b}]")
        if N < 1:
            raise ConfigError(f"N must be >= 1 at beta={b}", field=f"N_of_beta[{b}]")
        Ns.append(N)
    return Ns


@dataclass
class SweepRow:
    estimate: FreeEnergyEstimate
    ratio: Optional[float]
    ratio_ci: Optional[tuple]

    def to_dict(self):
        d = self.estimate.to_dict()
        b = self.estimate.beta
        d.update({"Fhat": d.pop("mean"), "Fhat_over_beta4": self.ratio,
                  "ratio_ci_lo": None if self.ratio_ci is None else self.ratio_ci[0],
                  "ratio_ci_hi": None if self.ratio_ci is None else self.ratio_ci[1],
                  "ratio_std_error": None if b == 0 else self.estimate.std_error / b ** 4})
        return d


def sweep_row(est: FreeEnergyEstimate) -> SweepRow:
    b = est.beta
    if b == 0:
        return SweepRow(est, None, None)
    b4 = b ** 4
    lo, hi = est.ci95
    return SweepRow(est, est.mean / b4, (lo / b4, hi / b4))


def sweep_seed(seed: int, index: int) -> int:
    return stream_seed(seed, index)


def beta_sweep(spec: EnvironmentSpec, betas: Sequence[float], N_of_beta: Schedule = None,
               replicas: int = 64, seed: int = 0, min_multiplier: float = 1.0):
    """Free-energy estimates along a list of couplings with the ratio F/beta^4."""
    Ns = resolve_schedule(betas, N_of_beta, min_multiplier)
    out = []
    for i, (b, N) in enumerate(zip(betas, Ns)):
        est = estimate_free_energy(spec, b, N, replicas, sweep_seed(seed, i))
        out.append(sweep_row(est))
    return out


# ---------------------------------------------------- fractional moment

@dataclass
class FractionalUpper:
    beta: float
    theta: float
    T: int
    n: int
    replicas: int
    value: float
    std_error: float
    jackknife_bias: float
    z_count: int
    seed: int

    def to_dict(self):
        return dict(self.__dict__)


def fractional_block_samples(spec, beta, theta, T, n, seed, start=0, count=1, rel_cut=1e-12):
    """Per-replica sums over z of max_x W^x(eta, B_z^n)^theta.

    Blocks whose free-walk mass (max over starts) is below ``rel_cut`` of
    the total are dropped.
    """
    zs = truncated_blocks(T, n, rel_cut)
    if beta == 0:
        return np.full(count, float(np.sum(deterministic_block_powers(theta, T, n, zs)))), zs
    seeds = _lattice.replica_seeds(np.uint64(seed), int(start), int(count))
    rows = np.array([max_block_powers(spec, beta, theta, T, n, int(s), zs) for s in seeds])
    return rows.sum(axis=1), zs


def truncated_blocks(T, n, rel_cut=1e-12):
    zs = reachable_blocks(T, n)
    mass = deterministic_block_powers(1.0, T, n, zs)
    return zs[mass >= rel_cut * mass.sum()]


def summarize_fractional(sums, beta, theta, T, n, seed, z_count) -> FractionalUpper:
    S = np.asarray(sums, dtype=float)
    R = S.size
    scale = 1.0 / (theta * T * n)
    m = float(np.sum(S) / R)
    value = scale * math.log(m)
    if R > 1:
        se = scale * float(np.std(S, ddof=1)) / (math.sqrt(R) * m)
        loo = (np.sum(S) - S) / (R - 1)
        bias = (R - 1) * (float(np.mean(scale * np.log(loo))) - value)
    else:
        se, bias = math.inf, 0.0
    return FractionalUpper(float(beta), float(theta), int(T), int(n), R, value, se, bias,
                           int(z_count), int(seed))


def _fractional(spec, beta, theta, T, n, replicas, seed, rel_cut=1e-12):
    if math.isqrt(n) < 1:
        raise DomainError("n too small for the origin block to span 3 sites")
    sums, zs = fractional_block_samples(spec, beta, theta, T, n, seed, 0, replicas, rel_cut)
    return summarize_fractional(sums, beta, theta, T, n, seed, zs.size)


def fractional_upper(spec: EnvironmentSpec, beta: float, theta: float, T: int, n: int,
                     replicas: int, seed: int, rel_cut: float = 1e-12) -> FractionalUpper:
    """(1/(theta T n)) log sum_z Q^[max_{x in B_0^n(0)} W^x_{beta,Tn}(eta, B_z^n)^theta].

    The reported ``jackknife_bias`` estimates the finite-replica bias of
    the log of the sample mean; it is reported, not subtracted.
    """
    if not 0.0 < theta < 1.0:
        raise DomainError("theta must lie in (0, 1)")
    return _fractional(spec, beta, theta, T, n, replicas, seed, rel_cut)


def block_maximum_statistic(spec, beta, T, n, replicas, seed, rel_cut=1e-12) -> FractionalUpper:
    """The theta = 1 member of the family: (1/(Tn)) log sum_z Q^[max_x W^x(B_z)]."""
    return _fractional(spec, beta, 1.0, T, n, replicas, seed, rel_cut)


# ------------------------------------------------------ variance profile

@dataclass
class VarianceRow:
    N: int
    variance: float
    variance_over_N: float
    std_error: float
    replicas: int

    def to_dict(self):
        return dict(self.__dict__)


def summarize_variance(logw, N) -> VarianceRow:
    v = np.asarray(logw, dtype=float)
    R = v.size
    var = float(np.var(v, ddof=1))
    c = v - v.mean()
    m4 = float(np.mean(c ** 4))
    # standard error of the sample variance from the fourth central moment
    se = math.sqrt(max(m4 - var * var * (R - 3) / (R - 1), 0.0) / R)
    return VarianceRow(int(N), var, var / N, se, R)


def variance_profile(spec: EnvironmentSpec, beta: float, N_grid: Sequence[int], replicas: int,
                     seed: int):
    """Sample variance of log W_N along a grid of N."""
    rows = []
    for i, N in enumerate(N_grid):
        lw = replica_log_partitions(spec, beta, N, stream_seed(seed, i), 0, replicas)
        rows.append(summarize_variance(lw, N))
    return rows
