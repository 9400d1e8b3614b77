"""Spatial blocks of width ~ n^{1/2} and block-restricted partition functions.

Block y at scale n is the integer interval
[(2y - 1) r + y, (2y + 1) r + y] with r = floor(sqrt(n)); consecutive
blocks tile Z.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _lattice
from .env_field import EnvironmentSpec, FieldHandle
from .errors import DomainError
from .kernels import srw_row

@dataclass(frozen=True)
class BlockIndex:
    y: int
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("block scale n must be >= 1")

    @property
    def interval(self):
        return block_range(self.y, self.n)

    def sites_at_time(self, ell):
        return block_sites_at_time(self.y, self.n, ell)

    def __contains__(self, site):
        lo, hi = self.interval
        return lo <= site <= hi


def block_range(y: int, n: int):
    if n < 1:
        raise DomainError("block scale n must be >= 1")
    r = math.isqrt(n)
    return (2 * y - 1) * r + y, (2 * y + 1) * r + y


def block_of(site: int, n: int) -> int:
    """The y with site in B_y^n."""
    r = math.isqrt(n)
    return (site + r) // (2 * r + 1)


def block_sites_at_time(y: int, n: int, ell: int) -> np.ndarray:
    """Sites of B_y^n reachable by the walk at time ell (same parity as ell)."""
    if ell < 0:
        raise DomainError("time must be nonnegative")
    lo, hi = block_range(y, n)
    first = lo + ((lo - ell) % 2)
    return np.arange(first, hi + 1, 2)


def block_tail_mass(z: int, T: int, n: int, x: int = 0):
    """(sum_{w in B_z^n} p_{Tn}(w - x), exp(-z^2 / T)) for x in B_0^n."""
    if T * n < 1:
        raise DomainError("need Tn >= 1")
    if x not in BlockIndex(0, n):
        raise DomainError("start must lie in B_0^n")
    N = T * n
    lo, hi = block_range(z, n)
    p = srw_row(N)
    sites = x - N + 2 * np.arange(N + 1)
    mass = float(p[(sites >= lo) & (sites <= hi)].sum())
    return mass, math.exp(-z * z / T)


def tail_index_set(theta: float, T: int, c: float = 1.0) -> np.ndarray:
    """I = {z : |z| <= c T^2}; theta labels the statistic it belongs to."""
    if T < 1:
        raise DomainError("need T >= 1")
    if not 0.0 < theta < 1.0 + 1e-12:
        raise DomainError("theta must lie in (0, 1]")
    m = math.floor(c * T * T)
    return np.arange(-m, m + 1)


def tail_mass_violations(ns=(4, 16, 64, 100, 256, 1024), Ts=(1, 2, 3, 4, 8, 16), zmin=2, zmax=40):
    """Every (n, T, x, z) on the grid where the block tail bound fails.

    All x in B_0^n with the parity of time 0 and T <= n are scanned.
    """
    out = []
    for n in ns:
        lo0, hi0 = block_range(0, n)
        for T in Ts:
            if T > n:
                continue
            N = T * n
            p = srw_row(N)
            for x in range(lo0, hi0 + 1):
                sites = x - N + 2 * np.arange(N + 1)
                for z in range(zmin, zmax + 1):
                    for zz in (z, -z):
                        lo, hi = block_range(zz, n)
                        mass = float(p[(sites >= lo) & (sites <= hi)].sum())
                        bound = math.exp(-zz * zz / T)
                        if mass > bound:
                            out.append((n, T, x, zz, mass, bound))
    return out


# ------------------------------------------- block-restricted partitions

def start_sites(n: int) -> np.ndarray:
    """B_0^n(0): the sites of the origin block reachable at time 0."""
    return block_sites_at_time(0, n, 0)


def block_log_weights(handle: FieldHandle, beta: float, T: int, n: int, x: int, zs):
    """log W^x_{beta,Tn}(eta, B_z^n) for each z in zs (-inf if unreachable)."""
    N = T * n
    w = np.empty(N + 1)
    E = _lattice.forward_final(*handle.kernel_args(beta), 0, int(x), N, w, _lattice.RESCALE_EVERY)
    return _block_sums(w, E, x, N, n, zs)


def _block_sums(w, E, x, N, n, zs):
    sites = x - N + 2 * np.arange(N + 1)
    out = np.full(len(zs), -np.inf)
    for i, z in enumerate(zs):
        lo, hi = block_range(int(z), n)
        a = np.searchsorted(sites, lo, side="left")
        b = np.searchsorted(sites, hi, side="right")
        if b > a:
            s = float(np.sum(w[a:b]))
            if s > 0.0:
                out[i] = _lattice.log_scaled(s, int(E))
    return out


def reachable_blocks(T: int, n: int) -> np.ndarray:
    """All z with B_z^n meeting the light cone of B_0^n(0) at time Tn."""
    N = T * n
    r = math.isqrt(n)
    zmax = block_of(r + N, n)
    return np.arange(-zmax, zmax + 1)


def max_block_powers(spec: EnvironmentSpec, beta: float, theta: float, T: int, n: int,
                     seed: int, zs=None) -> np.ndarray:
    """max_{x in B_0^n(0)} W^x(eta, B_z^n)^theta for one field, per z."""
    zs = reachable_blocks(T, n) if zs is None else np.asarray(zs)
    h = FieldHandle(seed, spec)
    best = np.full(len(zs), -np.inf)
    for x in start_sites(n):
        best = np.maximum(best, block_log_weights(h, beta, T, n, int(x), zs))
    return np.exp(theta * best)


def block_power_samples(spec, beta, theta, T, n, replicas, seed, zs=None):
    """(replicas, len(zs)) array of max_x W^x(B_z)^theta, one row per field."""
    zs = reachable_blocks(T, n) if zs is None else np.asarray(zs)
    seeds = _lattice.replica_seeds(np.uint64(seed), 0, int(replicas))
    return zs, np.array([max_block_powers(spec, beta, theta, T, n, int(s), zs) for s in seeds])


def deterministic_block_powers(theta: float, T: int, n: int, zs=None) -> np.ndarray:
    """The beta = 0 values max_x (sum_{y in B_z} p_{Tn}(y - x))^theta."""
    zs = reachable_blocks(T, n) if zs is None else np.asarray(zs)
    N = T * n
    p = srw_row(N)
    best = np.zeros(len(zs))
    for x in start_sites(n):
        with np.errstate(divide="ignore"):
            lw = _block_sums(p, 0, int(x), N, n, zs)
        best = np.maximum(best, np.exp(theta * lw))
    return best


@dataclass
class TailStatistic:
    T: int
    theta: float
    c: float
    value: float
    stderr: float
    replicas: int
    index_set_size: int


def tail_statistic(spec: EnvironmentSpec, beta: float, theta: float, T: int, n: int,
                   replicas: int, seed: int, c: float = 1.0) -> TailStatistic:
    """MC estimate of sum_{z not in I} Q[max_x W^x(eta, B_z^n)^theta].

    At beta = 0 the weights are deterministic and the value is exact.
    """
    I = tail_index_set(theta, T, c)
    zs = reachable_blocks(T, n)
    out = zs[np.abs(zs) > I[-1]]
    if out.size == 0:
        return TailStatistic(T, theta, c, 0.0, 0.0, replicas, I.size)
    if beta == 0:
        v = float(np.sum(deterministic_block_powers(theta, T, n, out)))
        return TailStatistic(T, theta, c, v, 0.0, replicas, I.size)
    _, S = block_power_samples(spec, beta, theta, T, n, replicas, seed, out)
    per = S.sum(axis=1)
    return TailStatistic(T, theta, c, float(per.mean()), float(per.std(ddof=1) / math.sqrt(len(per))),
                         replicas, I.size)
