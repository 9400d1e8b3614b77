"""Exact partition functions and polymer-measure functionals for one field.

All sweeps run over parity-packed vectors: at time n from start x0 the
reachable sites are x0 - n, x0 - n + 2, ..., x0 + n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from . import _lattice
from .env_field import EnvironmentSpec, FieldHandle, collision_exponent
from .errors import CapabilityError, DomainError
from .kernels import srw_row

LN2 = math.log(2.0)
CHAOS_EXACT_MAX_N = 14


@dataclass(frozen=True)
class TransferState:
    """Endpoint weights w(n, y) = stored[j] * exp(log_scale), y = x0 - n + 2 j."""

    n: int
    x0: int
    weights: np.ndarray
    exponent: int = 0
    t0: int = 0

    @property
    def log_scale(self) -> float:
        return self.exponent * LN2

    @property
    def sites(self) -> np.ndarray:
        return self.x0 - self.n + 2 * np.arange(self.n + 1)

    def log_total(self) -> float:
        return _lattice.log_total(self.weights, self.weights.size, self.exponent)

    def true_weights(self) -> np.ndarray:
        return np.ldexp(self.weights, self.exponent)


def transfer_state(handle: FieldHandle, beta: float, N: int, start: int = 0,
                   t0: int = 0, rescale_every: int = _lattice.RESCALE_EVERY) -> TransferState:
    """Forward sweep from (t0, start) over N steps of the field."""
    N = _check_N(N)
    w = np.empty(N + 1)
    E = _lattice.forward_final(*handle.kernel_args(beta), int(t0), int(start), N, w,
                               int(rescale_every))
    return TransferState(N, int(start), w, int(E), int(t0))


def log_partition(handle: FieldHandle, beta: float, N: int, start: int = 0,
                  t0: int = 0, rescale_every: int = _lattice.RESCALE_EVERY) -> float:
    """log W^x_{beta,N} for the field of ``handle``, point-to-line.

    ``t0`` shifts the time window to t0 + 1 .. t0 + N, which is what a
    restart at an intermediate time needs.
    """
    if beta == 0:
        _check_N(N)
        return 0.0
    return transfer_state(handle, beta, N, start, t0, rescale_every).log_total()


def log_partition_seeds(spec: EnvironmentSpec, beta: float, N: int, seeds, start: int = 0):
    """log W_{beta,N} for a batch of field seeds (compiled loop)."""
    seeds = np.asarray(seeds, dtype=np.uint64)
    if beta == 0:
        return np.zeros(seeds.shape[0])
    h = FieldHandle(0, spec)
    args = h.kernel_args(beta)[1:]
    return _lattice.log_partition_batch(seeds, *args, 0, int(start), _check_N(N))


def _log_forward(handle, beta, N, start, t0):
    # log-domain fallback: slower, but nothing underflows
    lw = np.zeros(1)
    for i in range(1, N + 1):
        z = handle.zetas(beta, np.full(i + 1, t0 + i), start - i + 2 * np.arange(i + 1))
        new = np.full(i + 1, -np.inf)
        new[:-1] = lw
        new[1:] = np.logaddexp(new[1:], lw)
        lw = new - LN2 + np.log(z)
    return lw


def endpoint_restricted(handle: FieldHandle, beta: float, N: int, start: int,
                        A: Iterable[int], t0: int = 0) -> float:
    """log sum_{y in A} w(N, y); -inf when no y in A is reachable."""
    A = np.unique(np.fromiter((int(a) for a in A), dtype=np.int64))
    if A.size == 0:
        raise DomainError("endpoint set A must be nonempty")
    N = _check_N(N)
    j = A - (start - N)
    ok = (j >= 0) & (j <= 2 * N) & (j % 2 == 0)
    if not ok.any():
        return -math.inf
    idx = j[ok] // 2
    st = transfer_state(handle, beta, N, start, t0)
    s = float(np.sum(st.weights[idx]))
    if s > 0.0:
        return _lattice.log_scaled(s, st.exponent)
    lw = _log_forward(handle, beta, N, start, t0)
    return float(np.logaddexp.reduce(lw[idx]))


def endpoint_log_weights(state: TransferState) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(state.weights) + state.log_scale


# ------------------------------------------------------- polymer measure

@dataclass
class PolymerMeasure:
    """Forward/backward arrays of the point-to-line polymer measure.

    Row i of ``F`` and ``B`` is packed on sites x0 - i + 2 j and scaled by
    2**-fexp[i], 2**-bexp[i].
    """

    beta: float
    N: int
    x0: int
    F: np.ndarray
    fexp: np.ndarray
    B: np.ndarray
    bexp: np.ndarray
    log_W: float

    def sites(self, i: int) -> np.ndarray:
        return self.x0 - i + 2 * np.arange(i + 1)

    def marginal(self, i: int) -> np.ndarray:
        """mu(S_i = x) on the packed sites of time i."""
        f = self.F[i, :i + 1]
        b = self.B[i, :i + 1]
        shift = (int(self.fexp[i]) + int(self.bexp[i])) * LN2 - self.log_W
        return f * b * math.exp(shift)

    def marginals(self) -> list:
        return [self.marginal(i) for i in range(self.N + 1)]


def polymer_marginals(handle: FieldHandle, beta: float, N: int, start: int = 0) -> PolymerMeasure:
    if N < 1:
        raise DomainError("need N >= 1")
    args = handle.kernel_args(beta)
    F = np.zeros((N + 1, N + 1))
    B = np.zeros((N + 1, N + 1))
    fexp = np.zeros(N + 1, dtype=np.int64)
    bexp = np.zeros(N + 1, dtype=np.int64)
    _lattice.forward_levels(*args, int(start), N, F, fexp)
    _lattice.backward_levels(*args, int(start), N, B, bexp)
    log_W = fexp[N] * LN2 + math.log(F[N].sum())
    return PolymerMeasure(float(beta), N, int(start), F, fexp, B, bexp, float(log_W))


def overlap_sum(measure: PolymerMeasure) -> float:
    """(mu x mu)[L_N] = sum_{i=1}^N sum_x mu(S_i = x)^2."""
    return float(sum(np.sum(measure.marginal(i) ** 2) for i in range(1, measure.N + 1)))


def replica_overlap(measure: PolymerMeasure) -> float:
    """beta^2 times the expected number of coincidences of two replicas."""
    if measure.beta == 0:
        return 0.0
    return measure.beta ** 2 * overlap_sum(measure)


def sample_path(measure: PolymerMeasure, rng=None, size: Optional[int] = None) -> np.ndarray:
    """Exact draws from the polymer measure by backward sampling.

    The endpoint is drawn from the time-N marginal; then, given S_i, the
    previous site is chosen among its two neighbours with probability
    proportional to the forward weight there.  Returns an (N + 1,) path,
    or (size, N + 1) paths.
    """
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    m = 1 if size is None else int(size)
    N = measure.N
    J = np.empty((m, N + 1), dtype=np.int64)
    pN = measure.F[N, :N + 1]
    cdf = np.cumsum(pN)
    J[:, N] = np.searchsorted(cdf, rng.random(m) * cdf[-1], side="right")
    J[:, N] = np.minimum(J[:, N], N)
    for i in range(N, 0, -1):
        row = measure.F[i - 1, :i]
        j = J[:, i]
        # site index j at time i neighbours j - 1 and j at time i - 1
        left = np.where(j >= 1, row[np.clip(j - 1, 0, i - 1)], 0.0)
        right = np.where(j <= i - 1, row[np.clip(j, 0, i - 1)], 0.0)
        u = rng.random(m) * (left + right)
        J[:, i - 1] = np.where(u < left, j - 1, j)
    paths = measure.x0 - np.arange(N + 1) + 2 * J
    return paths[0] if size is None else paths


# -------------------------------------------------------- second moment

def _collision_layers(N, kappa=None, kmax=None):
    """Dynamic program over the difference walk D = S - S'.

    D lives on 2Z; in units of 2 it stays put with probability 1/2 and
    moves by one with probability 1/4 each way.  With ``kappa`` the
    weight exp(kappa) is applied at each visit to 0 after time 0 and the
    (log) total is returned; with ``kmax`` the layered version returns
    E[C(L_N, k)] for k = 0..kmax.
    """
    if kmax is None:
        v = np.zeros(2 * N + 1)
        v[N] = 1.0
        ek = math.exp(kappa)
        logs = 0.0
        for _ in range(N):
            nv = 0.5 * v
            nv[1:] += 0.25 * v[:-1]
            nv[:-1] += 0.25 * v[1:]
            nv[N] *= ek
            m = nv.max()
            v = nv / m
            logs += math.log(m)
        return logs + math.log(v.sum())
    V = np.zeros((kmax + 1, 2 * N + 1))
    V[0, N] = 1.0
    for _ in range(N):
        nv = 0.5 * V
        nv[:, 1:] += 0.25 * V[:, :-1]
        nv[:, :-1] += 0.25 * V[:, 1:]
        # a collision now either is counted (moves up a layer) or not
        hit = nv[:, N].copy()
        nv[1:, N] += hit[:-1]
        V = nv
    return V.sum(axis=1)


def log_second_moment_exact(spec: EnvironmentSpec, beta: float, N: int, kappa_factor: float = 1.0) -> float:
    """log Q[W_{beta,N}^2] = log E_{S,S'}[exp(kappa_factor * kappa * L_N)]."""
    N = _check_N(N)
    if beta == 0 or N == 0:
        return 0.0
    kappa = kappa_factor * collision_exponent(spec, beta)
    return _collision_layers(N, kappa=kappa)


def second_moment_exact(spec: EnvironmentSpec, beta: float, N: int, kappa_factor: float = 1.0) -> float:
    """Q[W_{beta,N}^2] with kappa = lambda(2 beta) - 2 lambda(beta).

    ``kappa_factor=2`` gives the doubled-exponent alternative, kept so the
    two conventions can be compared against simulation.
    """
    return math.exp(log_second_moment_exact(spec, beta, N, kappa_factor))


def collision_binomial_moments(N: int, kmax: int) -> np.ndarray:
    """E[C(L_N, k)], k = 0..kmax, for two independent walks from 0."""
    return _collision_layers(_check_N(N), kmax=int(kmax))


# ------------------------------------------------------------------ chaos

@dataclass(frozen=True)
class ChaosDecomposition:
    beta: float
    N: int
    k_max: int
    terms: np.ndarray

    @property
    def total(self) -> float:
        return float(np.sum(self.terms))


def chaos_decompose(handle: FieldHandle, beta: float, N: int, k_max: Optional[int] = None,
                    start: int = 0, max_exact_N: int = CHAOS_EXACT_MAX_N) -> ChaosDecomposition:
    """Theta^(k), k = 0..k_max, of the point-to-line partition function."""
    N = _check_N(N)
    if N > max_exact_N:
        raise CapabilityError(f"exact chaos mode is capped at N = {max_exact_N}, got {N}")
    k_max = N if k_max is None else int(k_max)
    if not 0 <= k_max <= N:
        raise DomainError("need 0 <= k_max <= N")
    terms = _lattice.chaos_levels(*handle.kernel_args(beta), int(start), N, k_max)
    return ChaosDecomposition(float(beta), N, k_max, terms)


@dataclass
class ChaosProbe:
    means: np.ndarray
    mean_stderr: np.ndarray
    cov: np.ndarray
    cov_stderr: np.ndarray
    replicas: int
    first_chaos_variance: float
    exact_variances: np.ndarray

    def offdiag_z(self) -> np.ndarray:
        """cov / stderr for pairs k != l among k, l >= 1 (Theta^(0) = 1 is constant)."""
        z = self.cov[1:, 1:] / self.cov_stderr[1:, 1:]
        return z[~np.eye(z.shape[0], dtype=bool)]


def chaos_orthogonality_probe(spec: EnvironmentSpec, beta: float, N: int, k_max: int,
                              replicas: int, seed: int, max_exact_N: int = CHAOS_EXACT_MAX_N) -> ChaosProbe:
    """Sample means and covariances of Theta^(0..k_max) across fields."""
    N = _check_N(N)
    if N > max_exact_N:
        raise CapabilityError(f"exact chaos mode is capped at N = {max_exact_N}, got {N}")
    seeds = _lattice.replica_seeds(np.uint64(seed), 0, int(replicas))
    args = FieldHandle(0, spec).kernel_args(beta)[1:]
    TH = _lattice.chaos_batch(seeds, *args, 0, N, int(k_max))
    R = TH.shape[0]
    m = TH.mean(axis=0)
    C = TH - m
    prods = C[:, :, None] * C[:, None, :]
    cov = prods.sum(axis=0) / (R - 1)
    cov_se = prods.std(axis=0, ddof=1) / math.sqrt(R)
    mean_se = TH.std(axis=0, ddof=1) / math.sqrt(R)
    q = math.expm1(collision_exponent(spec, beta))
    ebin = collision_binomial_moments(N, k_max)
    exact = q ** np.arange(k_max + 1) * ebin
    exact[0] = 0.0
    return ChaosProbe(m, mean_se, cov, cov_se, R, float(exact[1]) if k_max >= 1 else 0.0, exact)


def _check_N(N):
    N = int(N)
    if N < 0:
        raise DomainError("N must be nonnegative")
    return N


def free_marginal(i: int) -> np.ndarray:
    """p_i on packed sites; the beta = 0 polymer marginal."""
    return srw_row(i)
