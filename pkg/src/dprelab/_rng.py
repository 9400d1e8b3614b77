"""Counter-based random numbers keyed on (seed, time, site).

Every environment value is a pure function of its key, so the lattice
recursions can draw disorder in any order (and in any process) and still
see the same field.  The mixer is the splitmix64 finalizer applied to a
chained key; Gaussians come from an exact ziggurat.
"""

import math

import numpy as np
from numba import njit

FAMILY_GAUSSIAN = 0
FAMILY_RADEMACHER = 1
FAMILY_UNIFORM = 2
FAMILY_EXPTAIL = 3

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_K_SEED = np.uint64(0xD1B54A32D192ED03)
_K_SITE = np.uint64(0xA0761D6478BD642F)
_K_SUB = np.uint64(0xE7037ED1A0B428DB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_TWO_M53 = 2.0 ** -53
_SQRT3 = math.sqrt(3.0)


@njit(cache=True)
def mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True)
def level_key(seed, n):
    h = mix64(np.uint64(seed) ^ _K_SEED)
    return mix64(h + np.uint64(n) * _GOLDEN)


@njit(cache=True)
def site_key_at_level(lkey, x):
    zz = (x << 1) ^ (x >> 63)
    return mix64(lkey + np.uint64(zz) * _K_SITE)


@njit(cache=True)
def site_key(seed, n, x):
    return site_key_at_level(level_key(seed, n), x)


@njit(cache=True)
def sub_uniform(key, j):
    """Uniform on (0, 1), never 0 or 1, from sub-counter j of a site key."""
    h = mix64(key + np.uint64(j + 1) * _K_SUB)
    return (np.float64(h >> _S11) + 0.5) * _TWO_M53


def _ziggurat_tables(layers=128, r=3.442619855899, v=9.91256303526217e-3):
    x = np.empty(layers + 1)
    x[0] = v / math.exp(-0.5 * r * r)
    x[1] = r
    for i in range(1, layers - 1):
        x[i + 1] = math.sqrt(-2.0 * math.log(v / x[i] + math.exp(-0.5 * x[i] * x[i])))
    x[layers] = 0.0
    return x, x[1:] / x[:-1]


_ZIG_X, _ZIG_RATIO = _ziggurat_tables()
_ZIG_R = _ZIG_X[1]
_S7 = np.uint64(127)


@njit(cache=True)
def _sub(key, stream, c):
    return sub_uniform(key, (stream << 32) + c)


@njit(cache=True)
def _normal_tail(key, stream):
    c = 0
    while True:
        a = -math.log(_sub(key, stream, c)) / _ZIG_R
        b = -math.log(_sub(key, stream, c + 1))
        c += 2
        if 2.0 * b >= a * a:
            return _ZIG_R + a


@njit(cache=True)
def _normal(key, stream):
    """Standard normal by the ziggurat method (Doornik's exact variant).

    Uses sub-streams stream (layer draws), stream + 1 (wedge tests) and
    stream + 2 (base-strip tail); each retry consumes fresh counters.
    """
    c = 0
    while True:
        h = mix64(key + np.uint64((stream << 32) + c + 1) * _K_SUB)
        i = np.int64(h & _S7)
        u = 2.0 * ((np.float64(h >> _S11) + 0.5) * _TWO_M53) - 1.0
        if abs(u) < _ZIG_RATIO[i]:
            return u * _ZIG_X[i]
        if i == 0:
            t = _normal_tail(key, stream + 2)
            return -t if u < 0.0 else t
        x = u * _ZIG_X[i]
        f0 = math.exp(-0.5 * (_ZIG_X[i] * _ZIG_X[i] - x * x))
        f1 = math.exp(-0.5 * (_ZIG_X[i + 1] * _ZIG_X[i + 1] - x * x))
        if f1 + _sub(key, stream + 1, c) * (f0 - f1) < 1.0:
            return x
        c += 1


@njit(cache=True)
def _gamma_shape_ge1(key, a, stream):
    # Marsaglia-Tsang; the rejection loop walks sub-streams deterministically.
    d = a - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    t = 0
    while True:
        z = _normal(key, stream + 4 * t)
        u = _sub(key, stream + 4 * t + 3, 0)
        t += 1
        v = 1.0 + c * z
        if v <= 0.0:
            continue
        v = v * v * v
        if math.log(u) < 0.5 * z * z + d - d * v + d * math.log(v):
            return d * v


@njit(cache=True)
def value_from_key(key, family, p0, p1):
    """Standardized disorder value for one site key.

    p0, p1 are family parameters prepared by the Python layer: for the
    exponential-tail family p0 = gamma and p1 = the unit-variance scale.
    """
    if family == FAMILY_GAUSSIAN:
        return _normal(key, 0)
    if family == FAMILY_UNIFORM:
        return _SQRT3 * (2.0 * sub_uniform(key, 0) - 1.0)
    # |X|^gamma ~ Gamma(1/gamma); shape < 1 boosted through Gamma(a + 1) U^(1/a)
    a = 1.0 / p0
    g = _gamma_shape_ge1(key, a + 1.0, 8) * _sub(key, 2, 0) ** (1.0 / a)
    sign = 1.0 if _sub(key, 1, 0) < 0.5 else -1.0
    return sign * p1 * g ** (1.0 / p0)


_K_BITS = np.uint64(0x8EBC6AF09C88C6E3)
_MASK6 = np.int64(63)


@njit(cache=True)
def sign_word(lkey, w):
    """64 packed signs covering sites 64 w, ..., 64 w + 63 of one level."""
    zz = (w << 1) ^ (w >> 63)
    return mix64((lkey ^ _K_BITS) + np.uint64(zz) * _K_SITE)


@njit(cache=True)
def sign_bit(lkey, x):
    """1 for a negative Rademacher value at site x, else 0."""
    h = sign_word(lkey, x >> 6)
    return np.int64((h >> np.uint64(x & _MASK6)) & np.uint64(1))


@njit(cache=True)
def raw_value(seed, family, p0, p1, n, x):
    if family == FAMILY_RADEMACHER:
        return 1.0 - 2.0 * sign_bit(level_key(seed, n), x)
    return value_from_key(site_key(seed, n, x), family, p0, p1)


@njit(cache=True)
def raw_values(seed, family, p0, p1, ns, xs):
    out = np.empty(ns.shape[0])
    for i in range(ns.shape[0]):
        out[i] = raw_value(seed, family, p0, p1, ns[i], xs[i])
    return out


_LOG2E = 1.4426950408889634
_LN2_HI = 6.93147180369123816490e-01
_LN2_LO = 1.90821492927058770002e-10


@njit(cache=True)
def exp_inplace(y, count, kbuf):
    """y[:count] <- exp(y[:count]) within 2 ulp of the correctly rounded value.

    Arguments are clamped to [-700, 700].

    Branch-free so the compiler can vectorize it; the exponent is
    assembled bitwise in kbuf.
    """
    for j in range(count):
        x = min(max(y[j], -700.0), 700.0)
        k = math.floor(x * _LOG2E + 0.5)
        r = (x - k * _LN2_HI) - k * _LN2_LO
        p = 1.0 + r * (1.0 + r * (0.5 + r * (1 / 6 + r * (1 / 24 + r * (1 / 120 + r * (
            1 / 720 + r * (1 / 5040 + r * (1 / 40320 + r * (1 / 362880 + r * (
                1 / 3628800 + r * (1 / 39916800 + r * (1 / 479001600))))))))))))
        kbuf[j] = (np.int64(k) + 1023) << 52
        y[j] = p
    sc = kbuf.view(np.float64)
    for j in range(count):
        y[j] *= sc[j]


@njit(cache=True)
def zeta_row(seed, family, p0, p1, beta, lam, n, x_lo, count, out, kbuf):
    """Fill out[j] = zeta(n, x_lo + 2 j) for j < count (kbuf is scratch)."""
    lkey = level_key(seed, n)
    if family == FAMILY_RADEMACHER:
        # one hash per 64-site word; kbuf holds the words of this level
        tab = np.empty(2)
        tab[0] = math.exp(beta - lam)
        tab[1] = math.exp(-beta - lam)
        w0 = x_lo >> 6
        nw = ((x_lo + 2 * (count - 1)) >> 6) - w0 + 1
        for q in range(nw):
            kbuf[q] = np.int64(sign_word(lkey, w0 + q))
        for j in range(count):
            x = x_lo + 2 * j
            h = np.uint64(kbuf[(x >> 6) - w0])
            out[j] = tab[np.int64((h >> np.uint64(x & _MASK6)) & np.uint64(1))]
        return
    for j in range(count):
        key = site_key_at_level(lkey, x_lo + 2 * j)
        out[j] = beta * value_from_key(key, family, p0, p1) - lam
    exp_inplace(out, count, kbuf)


@njit(cache=True)
def zeta_values(seed, family, p0, p1, beta, lam, ns, xs):
    """zeta at arbitrary (n, x) pairs, bit-identical to zeta_row."""
    m = ns.shape[0]
    out = np.empty(m)
    kb = np.empty(m, dtype=np.int64)
    if family == FAMILY_RADEMACHER:
        zp = math.exp(beta - lam)
        zm = math.exp(-beta - lam)
        for i in range(m):
            out[i] = zm if sign_bit(level_key(seed, ns[i]), xs[i]) else zp
        return out
    for i in range(m):
        out[i] = beta * raw_value(seed, family, p0, p1, ns[i], xs[i]) - lam
    exp_inplace(out, m, kb)
    return out


_K_MASTER = np.uint64(0x5851F42D4C957F2D)


@njit(cache=True)
def derive_seed_jit(master, index):
    h = mix64(np.uint64(master) ^ _K_MASTER)
    return mix64(h + np.uint64(index + 1) * _GOLDEN)


def derive_seed(master, index):
    """64-bit child seed for replica ``index`` of ``master``."""
    return int(derive_seed_jit(np.uint64(master & 0xFFFFFFFFFFFFFFFF), index))


def stream_seed(master, tag):
    """Independent master seed for a labelled sub-experiment."""
    return derive_seed(master ^ 0x2545F4914F6CDD1D, int(tag) + (1 << 40))
