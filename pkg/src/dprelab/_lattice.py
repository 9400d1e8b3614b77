"""Compiled lattice sweeps over parity-packed weight vectors.

A packed vector at time n with base b holds the weights of sites
b, b + 2, b + 4, ...; one step of the walk moves the base to b - 1 and
lengthens the vector by one.  Rescaling multiplies by powers of two, which
is exact in binary floating point, so the rescale schedule never changes
the computed numbers.
"""

import math

import numpy as np
from numba import njit

from ._rng import derive_seed_jit, zeta_row

LN2 = math.log(2.0)
# steps between rescales; weights cannot leave the double range in 8 steps
RESCALE_EVERY = 8


@njit(cache=True)
def _max_exponent(row, J):
    m = 0.0
    for j in range(J):
        m = max(m, row[j])
    if m == 0.0:
        return 0
    return math.frexp(m)[1]


@njit(cache=True)
def log_scaled(s, E):
    """log(s * 2**E) with a canonical mantissa/exponent split.

    The result depends only on the value s * 2**E, not on how it is
    split, so it is invariant under the rescale schedule.
    """
    m, e = math.frexp(s)
    return (E + e) * LN2 + math.log(m)


@njit(cache=True)
def _rescale(row, J):
    e = _max_exponent(row, J)
    if e != 0:
        f = math.ldexp(1.0, -e)
        for j in range(J):
            row[j] *= f
    return e


@njit(cache=True, inline="never")
def _step(a, b, z, J, c):
    """b[:J] <- one walk step of a[:J - 1] weighted by z.

    Kept out of line: as its own function the inner loop vectorizes,
    inlined next to the buffer swap it does not.
    """
    b[0] = c * a[0] * z[0]
    for j in range(1, J - 1):
        b[j] = c * (a[j - 1] + a[j]) * z[j]
    b[J - 1] = c * a[J - 2] * z[J - 1]


@njit(cache=True)
def forward_final(seed, family, p0, p1, beta, lam, t0, x0, N, w, rescale_every):
    """Point-to-line forward sweep from (t0, x0) over N steps.

    On return w[:N + 1] holds the endpoint weights on sites x0 - N + 2 j
    scaled by 2**-E, where E is the returned exponent.  The field used is
    the one at times t0 + 1, ..., t0 + N.  rescale_every = 0 disables
    rescaling altogether.
    """
    a = w
    b = np.empty(N + 1)
    z = np.empty(N + 1)
    kb = np.empty(N + 1, dtype=np.int64)
    a[0] = 1.0
    E = 0
    sc = 1.0
    for i in range(1, N + 1):
        J = i + 1
        zeta_row(seed, family, p0, p1, beta, lam, t0 + i, x0 - i, J, z, kb)
        _step(a, b, z, J, 0.5 * sc)
        sc = 1.0
        if rescale_every > 0 and i % rescale_every == 0:
            e = _max_exponent(b, J)
            E += e
            sc = math.ldexp(1.0, -e)
        a, b = b, a
    if sc != 1.0:
        for j in range(N + 1):
            a[j] *= sc
    if N % 2 == 1:
        # the final level landed in the scratch buffer
        for j in range(N + 1):
            w[j] = a[j]
    return E


@njit(cache=True)
def log_partition_batch(seeds, family, p0, p1, beta, lam, t0, x0, N):
    """log W for each seed, point-to-line from (t0, x0)."""
    R = seeds.shape[0]
    out = np.empty(R)
    w = np.empty(N + 1)
    for r in range(R):
        E = forward_final(seeds[r], family, p0, p1, beta, lam, t0, x0, N, w, RESCALE_EVERY)
        out[r] = log_total(w, N + 1, E)
    return out


@njit(cache=True)
def log_total(w, J, E):
    """log(sum(w[:J]) * 2**E), summed in index order."""
    s = 0.0
    for j in range(J):
        s += w[j]
    return log_scaled(s, E)


@njit(cache=True)
def replica_seeds(master, start, count):
    seeds = np.empty(count, dtype=np.uint64)
    for r in range(count):
        seeds[r] = derive_seed_jit(master, start + r)
    return seeds


@njit(cache=True)
def forward_levels(seed, family, p0, p1, beta, lam, x0, N, F, fexp):
    """Point-to-line forward pass keeping every level.

    F[i, :i + 1] is the packed forward vector at time i (base x0 - i),
    scaled by 2**-fexp[i].
    """
    z = np.empty(N + 1)
    kb = np.empty(N + 1, dtype=np.int64)
    F[0, 0] = 1.0
    fexp[0] = 0
    for i in range(1, N + 1):
        zeta_row(seed, family, p0, p1, beta, lam, i, x0 - i, i + 1, z, kb)
        _step(F[i - 1], F[i], z, i + 1, 0.5)
        fexp[i] = fexp[i - 1] + _rescale(F[i], i + 1)


@njit(cache=True)
def backward_levels(seed, family, p0, p1, beta, lam, x0, N, B, bexp):
    """Backward pass: B[i, j] is E[prod_{k>i} zeta | S_i = x0 - i + 2j]."""
    z = np.empty(N + 1)
    kb = np.empty(N + 1, dtype=np.int64)
    for j in range(N + 1):
        B[N, j] = 1.0
    bexp[N] = 0
    for i in range(N - 1, -1, -1):
        zeta_row(seed, family, p0, p1, beta, lam, i + 1, x0 - i - 1, i + 2, z, kb)
        for j in range(i + 1):
            B[i, j] = 0.5 * (z[j] * B[i + 1, j] + z[j + 1] * B[i + 1, j + 1])
        bexp[i] = bexp[i + 1] + _rescale(B[i], i + 1)


@njit(cache=True)
def chaos_levels(seed, family, p0, p1, beta, lam, x0, N, kmax):
    """Point-to-line chaos terms Theta^(0..kmax) by a layered recursion.

    Layer k carries the paths with exactly k centered-weight insertions.
    """
    T = np.zeros((kmax + 1, N + 1))
    T[0, 0] = 1.0
    z = np.empty(N + 1)
    kb = np.empty(N + 1, dtype=np.int64)
    new = np.empty((kmax + 1, N + 1))
    for i in range(1, N + 1):
        zeta_row(seed, family, p0, p1, beta, lam, i, x0 - i, i + 1, z, kb)
        for k in range(kmax + 1):
            for j in range(i + 1):
                left = T[k, j - 1] if j > 0 else 0.0
                right = T[k, j] if j < i else 0.0
                acc = 0.5 * (left + right)
                if k > 0:
                    lm = T[k - 1, j - 1] if j > 0 else 0.0
                    rm = T[k - 1, j] if j < i else 0.0
                    acc += 0.5 * (lm + rm) * (z[j] - 1.0)
                new[k, j] = acc
        for k in range(kmax + 1):
            for j in range(i + 1):
                T[k, j] = new[k, j]
    out = np.zeros(kmax + 1)
    for k in range(kmax + 1):
        for j in range(N + 1):
            out[k] += T[k, j]
    return out


@njit(cache=True)
def chaos_batch(seeds, family, p0, p1, beta, lam, x0, N, kmax):
    out = np.empty((seeds.shape[0], kmax + 1))
    for r in range(seeds.shape[0]):
        out[r] = chaos_levels(seeds[r], family, p0, p1, beta, lam, x0, N, kmax)
    return out
