"""Intermediate-disorder approximations of the continuum polymer.

With beta_n = n^{-1/4}, the lattice partition function W_{r beta_n, Tn}
approximates the point-to-line continuum partition function at coupling
r sqrt(2) and time T.  Every continuum quantity here is computed through
that lattice route.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy import special, stats

from . import _lattice
from ._rng import stream_seed
from .env_field import EnvironmentSpec, FieldHandle
from .errors import DomainError
from .kernels import srw_row
from .transfer import log_partition

POINT_TO_LINE = "point-to-line"
POINT_TO_POINT = "point-to-point"


@dataclass(frozen=True)
class IntermediateConfig:
    T: float
    n: int
    r: float = 1.0
    replicas: int = 256
    seed: int = 0
    spec: EnvironmentSpec = field(default_factory=EnvironmentSpec)
    kind: str = POINT_TO_LINE

    def __post_init__(self):
        if self.n < 1 or self.T <= 0 or self.r < 0:
            raise DomainError("need n >= 1, T > 0 and r >= 0")
        if self.N < 1:
            raise DomainError("T * n must be at least 1")
        if self.kind not in (POINT_TO_LINE, POINT_TO_POINT):
            raise DomainError(f"unknown target kind {self.kind!r}")

    @property
    def N(self) -> int:
        return int(math.floor(self.T * self.n + 1e-9))

    @property
    def beta(self) -> float:
        return self.r * self.n ** -0.25


def intermediate_partition(cfg: IntermediateConfig, handle: FieldHandle) -> float:
    """log W_{r n^{-1/4}, floor(Tn)} for one field."""
    if cfg.r == 0:
        return 0.0
    if cfg.kind == POINT_TO_POINT:
        return _p2p_log(handle.spec, cfg, np.array([handle.useed]))[0]
    return log_partition(handle, cfg.beta, cfg.N)


def _origin_block(n, N):
    """Packed indices at time N of the sites within the origin block."""
    r = math.isqrt(n)
    sites = -N + 2 * np.arange(N + 1)
    return np.nonzero(np.abs(sites) <= r)[0]


def _p2p_log(spec, cfg, seeds):
    # endpoint restricted to the origin block, divided by its free-walk mass
    N = cfg.N
    idx = _origin_block(cfg.n, N)
    norm = math.log(float(np.sum(srw_row(N)[idx])))
    args = FieldHandle(0, spec).kernel_args(cfg.beta)[1:]
    w = np.empty(N + 1)
    out = np.empty(len(seeds))
    for i, s in enumerate(seeds):
        E = _lattice.forward_final(np.uint64(s), *args, 0, 0, N, w, _lattice.RESCALE_EVERY)
        out[i] = _lattice.log_scaled(float(np.sum(w[idx])), E) - norm
    return out


def intermediate_samples(cfg: IntermediateConfig, start: int = 0, count: Optional[int] = None) -> np.ndarray:
    """log W for replicas start .. start + count - 1 of cfg.seed."""
    count = cfg.replicas - start if count is None else count
    if cfg.r == 0:
        return np.zeros(count)
    seeds = _lattice.replica_seeds(np.uint64(cfg.seed), int(start), int(count))
    if cfg.kind == POINT_TO_POINT:
        return _p2p_log(cfg.spec, cfg, seeds)
    args = FieldHandle(0, cfg.spec).kernel_args(cfg.beta)[1:]
    return _lattice.log_partition_batch(seeds, *args, 0, 0, cfg.N)


@dataclass
class ContinuumEstimate:
    T: float
    n: int
    r: float
    mean_log: float
    std_error: float
    replicas: int
    target_kind: str
    doubling_delta: Optional[float] = None
    doubling_stderr: Optional[float] = None

    def to_dict(self):
        return dict(self.__dict__)

    @property
    def bias_band(self) -> float:
        return 0.0 if self.doubling_delta is None else abs(self.doubling_delta)


def summarize_continuum(logw, cfg: IntermediateConfig) -> ContinuumEstimate:
    v = np.asarray(logw, dtype=float) / cfg.T
    R = v.size
    return ContinuumEstimate(cfg.T, cfg.n, cfg.r, float(np.sum(v) / R),
                             float(np.std(v, ddof=1) / math.sqrt(R)) if R > 1 else math.inf,
                             R, cfg.kind)


def continuum_free_energy(cfg: IntermediateConfig, doubling: bool = True) -> ContinuumEstimate:
    """(1/T) E[log W] at (T, n, r) with an n-doubling discretization delta.

    The doubled run uses an independent seed stream so the delta carries
    the combined standard error of both runs.
    """
    if cfg.replicas < 16:
        raise DomainError("need at least 16 replicas")
    est = summarize_continuum(intermediate_samples(cfg), cfg)
    if doubling and cfg.r != 0:
        cfg2 = replace(cfg, n=2 * cfg.n, seed=stream_seed(cfg.seed, 2))
        est2 = summarize_continuum(intermediate_samples(cfg2), cfg2)
        est.doubling_delta = est2.mean_log - est.mean_log
        est.doubling_stderr = math.hypot(est.std_error, est2.std_error)
    elif cfg.r == 0:
        est.doubling_delta = 0.0
        est.doubling_stderr = 0.0
    return est


# --------------------------------------------------------- series

@dataclass
class SeriesResult:
    value: float
    terms: int
    stopped_early: bool

    def __float__(self):
        return self.value


def second_moment_terms(beta: float, T: float, k_max: int) -> np.ndarray:
    k = np.arange(k_max + 1, dtype=float)
    with np.errstate(divide="ignore"):
        logb = np.log(beta * beta) if beta != 0 else -np.inf
    logt = k * np.where(k > 0, logb, 0.0) + 0.5 * k * math.log(T) - k * math.log(2.0) - special.gammaln(0.5 * k + 1.0)
    return np.exp(logt)


def second_moment_series(beta: float, T: float, k_max: int) -> SeriesResult:
    """sum_{k <= k_max} beta^{2k} T^{k/2} / (2^k Gamma(k/2 + 1)).

    Stops once a term underflows to zero after the peak of the series;
    the number of terms used and the early stop are recorded.
    """
    if k_max < 1:
        raise DomainError("need k_max >= 1")
    if T <= 0:
        raise DomainError("need T > 0")
    if beta == 0:
        return SeriesResult(1.0, 1, k_max > 0)
    t = second_moment_terms(beta, T, k_max)
    peak = int(np.argmax(t))
    zero = np.nonzero(t[peak:] == 0.0)[0]
    if zero.size:
        stop = peak + int(zero[0])
        return SeriesResult(float(np.sum(t[:stop])), stop, True)
    return SeriesResult(float(np.sum(t)), k_max + 1, False)


def continuum_second_moment(beta: float, T: float) -> float:
    """Closed form at beta = sqrt(2): e^T (1 + erf sqrt(T)); general beta via the series."""
    if abs(beta - math.sqrt(2.0)) < 1e-15:
        return math.exp(T) * (1.0 + math.erf(math.sqrt(T)))
    return second_moment_series(beta, T, 400).value


# ------------------------------------------------ structural checks

@dataclass(frozen=True)
class CKResult:
    lhs: float
    rhs: float
    log_lhs: float
    log_rhs: float


def chapman_kolmogorov_check(handle: FieldHandle, beta: float, N: int, m: int) -> CKResult:
    """W_N against sum_z W_m(eta, {z}) W^{(m, z)}_{N - m}(eta).

    The restart from (m, z) reuses the same field at times m + 1 .. N.
    """
    if not 1 <= m < N:
        raise DomainError("need 1 <= m < N")
    from .transfer import transfer_state
    head = transfer_state(handle, beta, m)
    total = log_partition(handle, beta, N)
    logs = []
    for j, z in enumerate(head.sites):
        if head.weights[j] == 0.0:
            continue
        tail = log_partition(handle, beta, N - m, start=int(z), t0=m)
        logs.append(head.log_scale + math.log(head.weights[j]) + tail)
    log_rhs = float(np.logaddexp.reduce(logs))
    return CKResult(math.exp(total), math.exp(log_rhs), total, log_rhs)


@dataclass
class ScalingReport:
    T: float
    n: int
    r: float
    ks_statistic: float
    p_value: float
    mean_a: float
    mean_b: float
    mean_a_stderr: float
    mean_b_stderr: float
    replicas: int

    def to_dict(self):
        return dict(self.__dict__)


def scaling_distribution_check(T: float, n: int, r: float, replicas: int, seed: int,
                               spec: Optional[EnvironmentSpec] = None, matched_seeds: bool = False) -> ScalingReport:
    """Two-sample KS test of the point-to-line scaling relation.

    Side A approximates Z_{sqrt 2}(r^2 T) (coupling multiplier 1, horizon
    r^2 T); side B approximates Z_{sqrt(2 r)}(T) (multiplier sqrt r,
    horizon T).  The two agree in law for the continuum polymer.  Means are
    of W itself and should both be near 1.
    """
    spec = spec or EnvironmentSpec()
    if not 0.5 <= r <= 2.0:
        raise DomainError("scaling check is restricted to r in [1/2, 2]")
    ca = IntermediateConfig(r * r * T, n, 1.0, replicas, seed, spec)
    sb = seed if matched_seeds else stream_seed(seed, 1)
    cb = IntermediateConfig(T, n, math.sqrt(r), replicas, sb, spec)
    a = intermediate_samples(ca)
    b = intermediate_samples(cb)
    ks = stats.ks_2samp(a, b)
    wa, wb = np.exp(a), np.exp(b)
    sd = lambda w: float(np.std(w, ddof=1) / math.sqrt(w.size))
    return ScalingReport(T, n, r, float(ks.statistic), float(ks.pvalue), float(wa.mean()),
                         float(wb.mean()), sd(wa), sd(wb), replicas)


# ------------------------------------------------ second moments of W

@dataclass
class MomentEstimate:
    n: int
    T: float
    r: float
    mean: float
    mean_stderr: float
    second: float
    second_stderr: float
    exact_second: float
    replicas: int

    def to_dict(self):
        return dict(self.__dict__)


def intermediate_second_moment(cfg: IntermediateConfig) -> MomentEstimate:
    """Sample mean and second moment of W at (T, n, r), next to the exact Q[W^2]."""
    from .transfer import second_moment_exact
    w = np.exp(intermediate_samples(cfg))
    R = w.size
    w2 = w * w
    exact = second_moment_exact(cfg.spec, cfg.beta, cfg.N)
    return MomentEstimate(cfg.n, cfg.T, cfg.r, float(w.mean()), float(w.std(ddof=1) / math.sqrt(R)),
                          float(w2.mean()), float(w2.std(ddof=1) / math.sqrt(R)), float(exact), R)


def richardson(ns: Sequence[int], values: Sequence[float], errors: Sequence[float], rate: float = 0.5):
    """Extrapolate values(n) = v + c n^{-rate} to n -> infinity by weighted least squares.

    Returns (limit, stderr).
    """
    ns = np.asarray(ns, dtype=float)
    y = np.asarray(values, dtype=float)
    e = np.asarray(errors, dtype=float)
    X = np.stack([np.ones_like(ns), ns ** -rate], axis=1)
    Wt = 1.0 / np.maximum(e, 1e-300) ** 2
    A = X.T @ (X * Wt[:, None])
    cov = np.linalg.inv(A)
    coef = cov @ (X.T @ (Wt * y))
    return float(coef[0]), float(math.sqrt(cov[0, 0]))
