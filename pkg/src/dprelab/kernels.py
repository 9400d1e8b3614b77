"""Random-walk and heat kernels, plus numerical checks of heat-kernel identities.

``verify_identity`` evaluates the left side of each identity by direct
numerical integration (quadrature on a grid, adaptive quadrature, or
Gauss-Jacobi rules over the time simplex) and the right side from its
closed form, so the two are computed independently.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import NamedTuple

import numpy as np
from scipy import integrate, special, stats

from .errors import DomainError, EstimationError

LOG_SPACE_ABOVE = 1000


# ---------------------------------------------------------------- kernels

def srw_kernel(n: int, x: int) -> float:
    """P(S_n = x) for the simple random walk started at 0."""
    n = int(n)
    x = int(x)
    if n < 0:
        raise DomainError("n must be nonnegative")
    if abs(x) > n or (n + x) % 2:
        return 0.0
    k = (n + x) // 2
    if n > LOG_SPACE_ABOVE:
        return float(stats.binom.pmf(k, n, 0.5))
    return math.comb(n, k) / 2.0 ** n


def srw_kernel_exact(n: int, x: int) -> Fraction:
    if n < 0:
        raise DomainError("n must be nonnegative")
    if abs(x) > n or (n + x) % 2:
        return Fraction(0)
    return Fraction(math.comb(n, (n + x) // 2), 2 ** n)


def srw_row(n: int) -> np.ndarray:
    """p_n on the packed sites -n, -n + 2, ..., n."""
    k = np.arange(n + 1)
    if n > LOG_SPACE_ABOVE:
        # saddle-point pmf; 2^n overflows and betaln loses ~1e-11 here
        return stats.binom.pmf(k, n, 0.5)
    return np.array([math.comb(n, int(j)) for j in k], dtype=float) / 2.0 ** n


def heat_kernel(t, x):
    """rho_t(x) = exp(-x^2 / (2t)) / sqrt(2 pi t)."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise DomainError("heat kernel needs t > 0")
    x = np.asarray(x, dtype=float)
    out = np.exp(-x * x / (2.0 * t)) / np.sqrt(2.0 * np.pi * t)
    return float(out) if out.ndim == 0 else out


def _rho(t, x):
    return np.exp(-x * x / (2.0 * t)) / np.sqrt(2.0 * np.pi * t)


# ------------------------------------------------------- integration tools

class IdentityResult(NamedTuple):
    lhs: float
    rhs: float


EQUALITY = "equality"
INEQUALITY = "inequality"

IDENTITY_KIND = {
    "hsqare": EQUALITY,
    "hprod": EQUALITY,
    "hconv": EQUALITY,
    "hsqconv": EQUALITY,
    "h2": EQUALITY,
    "hfull": EQUALITY,
    "hfull2": EQUALITY,
    "hest": INEQUALITY,
}
IDENTITIES = tuple(IDENTITY_KIND)

_QUAD = dict(epsabs=1e-13, epsrel=1e-12, limit=400)


def _quad(f, a, b, tol=1e-10, **kw):
    val, err = integrate.quad(f, a, b, **{**_QUAD, **kw})
    if not err < tol:
        raise EstimationError(f"quadrature error {err:.2e} above {tol:.0e}", achieved=err)
    return val


def _grid_chain(gaps, x, y):
    """Integral over x_1..x_k of prod_i rho_{gap_i}(x_i, x_{i+1})^2, x_0 = x, x_{k+1} = y.

    Trapezoid rule on a uniform grid, applied as repeated matrix products.
    The integrand is Gaussian in every coordinate, where the trapezoid rule
    converges like exp(-2 pi^2 sigma^2 / h^2).
    """
    gaps = np.asarray(gaps, dtype=float)
    sig = math.sqrt(gaps.min() / 4.0)
    h = 0.4 * sig
    R = max(abs(x), abs(y)) + 12.0 * math.sqrt(gaps.sum())
    g = np.arange(-R, R + h / 2, h)
    v = _rho(gaps[0], g - x) ** 2
    for d in gaps[1:-1]:
        K = _rho(d, g[:, None] - g[None, :]) ** 2
        v = (v @ K) * h
    return float(np.sum(v * _rho(gaps[-1], y - g) ** 2) * h)


def _gaussian_chain(gaps, x, y=None):
    """Closed-form Gaussian integral of the squared-kernel chain.

    gaps has shape (M, m).  With y given the chain has m factors between
    x and y and m - 1 interior points; with y=None the terminal point is
    free, so m factors and m integrated points.  Evaluated by assembling
    the tridiagonal precision matrix, which is independent of the product
    formulas being checked.
    """
    gaps = np.atleast_2d(np.asarray(gaps, dtype=float))
    M, m = gaps.shape
    inv = 1.0 / gaps
    k = m - 1 if y is not None else m
    pref = np.prod(1.0 / (2.0 * np.pi * gaps), axis=1)
    if k == 0:
        return pref * np.exp(-(y - x) ** 2 * inv[:, 0])
    A = np.zeros((M, k, k))
    b = np.zeros((M, k))
    for i in range(k):
        A[:, i, i] = 2.0 * inv[:, i]
        if i + 1 < m:
            A[:, i, i] += 2.0 * inv[:, i + 1]
        if i + 1 < k:
            A[:, i, i + 1] = A[:, i + 1, i] = -2.0 * inv[:, i + 1]
    b[:, 0] = 2.0 * x * inv[:, 0]
    c0 = -x * x * inv[:, 0]
    if y is not None:
        b[:, k - 1] += 2.0 * y * inv[:, m - 1]
        c0 = c0 - y * y * inv[:, m - 1]
    _, logdet = np.linalg.slogdet(A)
    sol = np.linalg.solve(A, b[..., None])[..., 0]
    expo = 0.5 * np.sum(b * sol, axis=1) + c0
    return pref * np.exp(0.5 * k * math.log(2.0 * math.pi) - 0.5 * logdet + expo)


def _simplex_rule(exponents, nodes):
    """Gauss-Jacobi rule for integrals over {w >= 0, sum w = 1} of prod w_i^a_i g(w).

    Stick-breaking coordinates turn the singular weight into a product of
    one-dimensional Jacobi weights.  Returns (w, weights) with w of shape
    (M, k + 1) such that sum(weights * g(w)) approximates the integral
    against dw_1 ... dw_k.  The returned weights already include
    prod w_i^a_i, so callers pass g only.
    """
    a = np.asarray(exponents, dtype=float)
    k = a.size - 1
    rules = []
    for j in range(1, k + 1):
        alpha = a[j:].sum() + (k - j)    # power of (1 - v_j)
        beta = a[j - 1]                  # power of v_j
        xj, wj = special.roots_jacobi(nodes, alpha, beta)
        v = 0.5 * (1.0 + xj)
        rules.append((v, wj * 0.5 ** (alpha + beta + 1.0)))
    grids = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    wts = np.meshgrid(*[r[1] for r in rules], indexing="ij")
    V = np.stack([g.ravel() for g in grids], axis=1)
    Wt = np.prod(np.stack([g.ravel() for g in wts], axis=1), axis=1)
    M = V.shape[0]
    w = np.empty((M, k + 1))
    rest = np.ones(M)
    for j in range(k):
        w[:, j] = V[:, j] * rest
        rest = rest * (1.0 - V[:, j])
    w[:, k] = rest
    return w, Wt


def _simplex_gauss(exponents, g, nodes=8):
    w, Wt = _simplex_rule(exponents, nodes)
    return float(np.sum(Wt * g(w)))


def _simplex_mc(k, g_full, rng, samples, conc=0.75):
    """Importance-sampled simplex integral of g_full(w) dw_1..dw_k.

    Dirichlet(conc) proposals keep the variance finite for integrands with
    w^{-1/2} singularities.  Returns (estimate, standard error).
    """
    w = rng.dirichlet(np.full(k + 1, conc), size=samples)
    logq = (special.gammaln(conc * (k + 1)) - (k + 1) * special.gammaln(conc)
            + (conc - 1.0) * np.log(w).sum(axis=1))
    vals = g_full(w) * np.exp(-logq)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(samples))


# ----------------------------------------------------------- identities

def _hsqare(t, x):
    return IdentityResult(_rho(t, x) ** 2, _rho(t / 2.0, x) / (2.0 * math.sqrt(math.pi * t)))


def _hprod(t, x, y, w):
    return IdentityResult(_rho(t, w - x) * _rho(t, w - y),
                          _rho(2.0 * t, y - x) * _rho(t / 2.0, w - 0.5 * (x + y)))


def _hconv(s, t, x, z):
    f = lambda y: _rho(s, y - x) * _rho(t, z - y)
    c = (t * x + s * z) / (s + t)
    lhs = _quad(f, -np.inf, c) + _quad(f, c, np.inf)
    return IdentityResult(lhs, _rho(s + t, z - x))


def _hsqconv(times, x, y):
    times = np.asarray(times, dtype=float)
    gaps = np.diff(times)
    k = gaps.size - 1
    lhs = _grid_chain(gaps, x, y)
    rhs = (_rho((times[-1] - times[0]) / 2.0, y - x) * np.prod(1.0 / np.sqrt(gaps))
           / (2.0 ** (k + 1) * math.pi ** ((k + 1) / 2.0)))
    return IdentityResult(lhs, float(rhs))


def _h2(t0, t2, x0):
    # s = u^2 removes the s^{-1/2} singularity of the inner integral
    def inner(u):
        if u == 0.0:
            return 0.0
        s = u * u
        f = lambda x1: _rho(s, x1 - x0) ** 2
        return 2.0 * u * (_quad(f, -np.inf, x0) + _quad(f, x0, np.inf))
    lhs = _quad(inner, 0.0, math.sqrt(t2 - t0))
    return IdentityResult(lhs, math.sqrt(t2 - t0) / math.sqrt(math.pi))


def _hfull(k, t0, t1, x, y, method="quadrature", rng=None, samples=200_000):
    L = t1 - t0
    k = int(k)
    a = np.full(k + 1, -0.5)
    # times enter only through the gaps L * w
    smooth = lambda w: _gaussian_chain(L * w, x, y) * np.prod(np.sqrt(w), axis=1)
    rhs = L ** ((k - 1) / 2.0) / (2.0 ** (k + 1) * special.gamma((k + 1) / 2.0)) * _rho(L / 2.0, y - x)
    if method == "mc":
        est, se = _simplex_mc(k, lambda w: _gaussian_chain(L * w, x, y), _as_rng(rng), samples)
        return IdentityResult(est * L ** k, float(rhs)), se * L ** k
    lhs = _simplex_gauss(a, smooth, nodes=_nodes_for(k)) * L ** k
    return IdentityResult(lhs, float(rhs))


def _hfull2(k, s, t, x, method="quadrature", rng=None, samples=200_000):
    L = t - s
    k = int(k)
    a = np.r_[np.full(k, -0.5), 0.0]
    # the last gap (t_k, t) carries no kernel factor
    smooth = lambda w: _gaussian_chain(L * w[:, :k], x, None) * np.prod(np.sqrt(w[:, :k]), axis=1)
    rhs = L ** (k / 2.0) / (2.0 ** k * special.gamma((k + 2) / 2.0))
    if method == "mc":
        est, se = _simplex_mc(k, lambda w: _gaussian_chain(L * w[:, :k], x, None),
                              _as_rng(rng), samples)
        return IdentityResult(est * L ** k, float(rhs)), se * L ** k
    lhs = _simplex_gauss(a, smooth, nodes=_nodes_for(k)) * L ** k
    return IdentityResult(lhs, float(rhs))


def hest_middle(t, x):
    """The intermediate expression of the hest chain, by quadrature."""
    ax = abs(x)
    if ax == 0.0:
        return 0.0
    f = lambda u: u ** -1.5 * -math.expm1(-u)
    lo = ax * ax / (2.0 * t)
    return ax / (2.0 * math.sqrt(math.pi)) * (_quad(f, lo, max(lo, 1.0)) + _quad(f, max(lo, 1.0), np.inf))


def _hest(t, x):
    # s = u^2 again; rho_s(0) - rho_s(x) ~ x^2 s^{-3/2} / 2 is tame once squared away
    c = math.sqrt(2.0 / math.pi)

    def f(u):
        # 2 u (rho_{u^2}(0) - rho_{u^2}(x)), written in x / u to avoid underflow
        if u == 0.0:
            return c if x != 0.0 else 0.0
        q = x / u
        return c * -math.expm1(-0.5 * q * q)
    # the integrand turns over near u = |x|
    top = math.sqrt(t)
    cut = min(abs(x), top)
    lhs = _quad(f, 0.0, cut) + (_quad(f, cut, top) if cut < top else 0.0)
    # int_0^inf u^{-3/2} (1 ^ u) du = 2 + 2
    return IdentityResult(lhs, abs(x) / (2.0 * math.sqrt(math.pi)) * 4.0)


def _nodes_for(k):
    return max(3, min(10, int(200_000 ** (1.0 / max(k, 1)))))


def _as_rng(rng):
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def verify_identity(name: str, params, **kw):
    """Evaluate both sides of a heat-kernel identity.

    Parameter layouts:

    ========  ==========================================
    hsqare    (t, x)
    hprod     (t, x, y, w)
    hconv     (s, t, x, z)
    hsqconv   (k, t_0, ..., t_{k+1}, x, y)
    h2        (t_0, t_2, x_0)
    hfull     (k, t_0, t_{k+1}, x, y)
    hfull2    (k, s, t, x)
    hest      (t, x)
    ========  ==========================================

    Returns ``IdentityResult(lhs, rhs)``; for ``hest`` the second entry is
    the upper bound.  ``hfull`` and ``hfull2`` accept ``method="mc"``, in
    which case ``(IdentityResult, stderr)`` is returned.
    """
    p = [float(v) for v in params]
    if name not in IDENTITY_KIND:
        raise DomainError(f"unknown identity {name!r}")
    _check_domain(name, p)
    if name == "hsqare":
        return _hsqare(*p)
    if name == "hprod":
        return _hprod(*p)
    if name == "hconv":
        return _hconv(*p)
    if name == "hsqconv":
        k = int(p[0])
        return _hsqconv(p[1:k + 3], p[k + 3], p[k + 4])
    if name == "h2":
        return _h2(*p)
    if name == "hfull":
        return _hfull(*p, **kw)
    if name == "hfull2":
        return _hfull2(*p, **kw)
    return _hest(*p)


def _check_domain(name, p):
    nparams = {"hsqare": 2, "hprod": 4, "hconv": 4, "h2": 3, "hfull": 5, "hfull2": 4, "hest": 2}
    if name == "hsqconv":
        if not p or p[0] < 1 or p[0] != int(p[0]) or len(p) != int(p[0]) + 5:
            raise DomainError("hsqconv takes (k, t_0..t_{k+1}, x, y) with k >= 1")
        if np.any(np.diff(p[1:int(p[0]) + 3]) <= 0):
            raise DomainError("hsqconv times must increase")
        return
    if len(p) != nparams[name]:
        raise DomainError(f"{name} takes {nparams[name]} parameters")
    if name in ("hsqare", "hprod", "hest") and p[0] <= 0:
        raise DomainError("time must be positive")
    if name == "hconv" and (p[0] <= 0 or p[1] <= 0):
        raise DomainError("times must be positive")
    if name == "h2" and p[1] <= p[0]:
        raise DomainError("need t_2 > t_0")
    if name in ("hfull", "hfull2"):
        if p[0] < 1 or p[0] != int(p[0]):
            raise DomainError("k must be a positive integer")
        if p[2] <= p[1]:
            raise DomainError("time interval must be nonempty")


def random_params(name: str, rng: np.random.Generator):
    """One random parameter draw inside the domain of ``name``."""
    u = rng.uniform
    if name == "hsqare":
        return [u(0.05, 4.0), u(-3, 3)]
    if name == "hprod":
        return [u(0.05, 4.0), u(-3, 3), u(-3, 3), u(-3, 3)]
    if name == "hconv":
        return [u(0.05, 4.0), u(0.05, 4.0), u(-3, 3), u(-3, 3)]
    if name == "hsqconv":
        k = int(rng.integers(1, 5))
        t = np.cumsum(np.r_[u(0, 2), u(0.1, 1.5, size=k + 1)])
        return [k, *t, u(-2, 2), u(-2, 2)]
    if name == "h2":
        t0 = u(0, 2)
        return [t0, t0 + u(0.05, 4.0), u(-3, 3)]
    if name == "hfull":
        t0 = u(0, 2)
        return [int(rng.integers(1, 7)), t0, t0 + u(0.2, 3.0), u(-2, 2), u(-2, 2)]
    if name == "hfull2":
        s = u(0, 2)
        return [int(rng.integers(1, 7)), s, s + u(0.2, 3.0), u(-2, 2)]
    return [u(0.05, 4.0), u(-3, 3)]


def identity_suite(draws=100, seed=0, tol=1e-8, names=IDENTITIES):
    """Run every identity on ``draws`` random parameter sets.

    Yields dict rows with lhs, rhs, tolerance and a pass flag.  Equalities
    pass when |lhs - rhs| < tol, inequalities when lhs <= rhs.
    """
    for name in names:
        rng = np.random.default_rng([seed, IDENTITIES.index(name)])
        for d in range(draws):
            p = random_params(name, rng)
            lhs, rhs = verify_identity(name, p)
            kind = IDENTITY_KIND[name]
            ok = abs(lhs - rhs) < tol if kind == EQUALITY else lhs <= rhs
            yield {"identity": name, "draw": d, "kind": kind, "params": [float(v) for v in p],
                   "lhs": float(lhs), "rhs": float(rhs), "tolerance": tol if kind == EQUALITY else 0.0,
                   "passed": bool(ok)}


# --------------------------------------------------- local limit bound

def _gauss_term(n, x, y, form):
    if form == "printed":
        g = lambda z: math.exp(-z * z / (4.0 * n))
        return 2.0 / math.sqrt(4.0 * math.pi * n) * abs(g(x + y) - g(x))
    g = lambda z: 2.0 * math.exp(-z * z / (2.0 * n)) / math.sqrt(2.0 * math.pi * n)
    return abs(g(x + y) - g(x))


def llt_lhs(n, x, y):
    return abs(srw_kernel(n, x + y) - srw_kernel(n, x))


def llt_difference_bound(n: int, x: int, y: int, c: float | None = None, form: str = "printed"):
    """(|p_n(x+y) - p_n(x)|, bound).

    ``form="printed"`` uses c|x|/n^2 plus the Gaussian difference at
    variance 2n.  ``form="corrected"`` uses c|y|/n^2 plus the difference
    of the walk's own Gaussian approximation 2 rho_n.  When c is None the
    constant calibrated on ``LLT_GRID`` for that form is used.
    """
    if n % 2 or y % 2:
        raise DomainError("llt bound needs even n and even y")
    if form not in ("printed", "corrected"):
        raise DomainError(f"unknown form {form!r}")
    if c is None:
        c = calibrated_llt_constant(form)
    lead = abs(x) if form == "printed" else abs(y)
    return IdentityResult(llt_lhs(n, x, y), c * lead / n ** 2 + _gauss_term(n, x, y, form))


def llt_grid():
    """The fixed validation grid of (n, x, y) used to calibrate c."""
    pts = []
    for n in (10, 20, 50, 100, 200, 500, 1000, 2000, 5000, 10_000):
        r = int(math.isqrt(n))
        xs = sorted({v for v in (2, 4, 10, r, 2 * r, 3 * r) if v <= n})
        for x in xs:
            x = x + (x % 2)  # parity of n, which is even
            for sgn in (1, -1):
                for y in (2, -2, 4, -4, 10, -10):
                    if abs(sgn * x + y) <= n:
                        pts.append((n, sgn * x, y))
    return pts


_LLT_CACHE = {}


def calibrate_llt_constant(form="printed", grid=None):
    """sup over the grid of (lhs - gaussian term) / (lead / n^2), lead != 0."""
    grid = llt_grid() if grid is None else grid
    best = 0.0
    for n, x, y in grid:
        lead = abs(x) if form == "printed" else abs(y)
        if lead == 0:
            continue
        r = (llt_lhs(n, x, y) - _gauss_term(n, x, y, form)) * n ** 2 / lead
        best = max(best, r)
    return best


def calibrated_llt_constant(form="printed"):
    if form not in _LLT_CACHE:
        _LLT_CACHE[form] = calibrate_llt_constant(form)
    return _LLT_CACHE[form]
