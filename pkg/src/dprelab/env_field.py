"""Disorder laws and the random-access environment field.

Every built-in family is standardized to mean 0 and variance 1.  The
field eta(n, x) is generated by hashing (seed, n, x), so any site can be
evaluated on its own and two evaluations always agree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import integrate, special

from . import _rng
from .errors import DomainError, ParameterError

GAUSSIAN = "gaussian-unit"
RADEMACHER = "rademacher"
UNIFORM = "uniform-symmetric"
EXPTAIL = "centered-exponential-tail"

FAMILIES = (GAUSSIAN, RADEMACHER, UNIFORM, EXPTAIL)

_FAMILY_CODE = {
    GAUSSIAN: _rng.FAMILY_GAUSSIAN,
    RADEMACHER: _rng.FAMILY_RADEMACHER,
    UNIFORM: _rng.FAMILY_UNIFORM,
    EXPTAIL: _rng.FAMILY_EXPTAIL,
}

_LOG2 = math.log(2.0)
_SQRT3 = math.sqrt(3.0)


def _log_cosh(b):
    b = abs(b)
    return b + math.log1p(math.exp(-2.0 * b)) - _LOG2


def _log_sinhc(u):
    """log(sinh(u) / u), with the removable singularity at 0."""
    u = abs(u)
    if u < 1e-4:
        u2 = u * u
        return u2 / 6.0 - u2 * u2 / 180.0 + u2 * u2 * u2 / 2835.0
    if u < 20.0:
        return math.log(math.sinh(u) / u)
    return u + math.log1p(-math.exp(-2.0 * u)) - _LOG2 - math.log(u)


@dataclass(frozen=True)
class EnvironmentSpec:
    """A standardized disorder law.

    Parameters
    ----------
    family : str
        One of ``FAMILIES``.
    params : tuple of float
        ``uniform-symmetric`` takes the half-width ``a`` of the raw law and
        ``centered-exponential-tail`` takes the tail exponent ``gamma``
        (density proportional to ``exp(-|x/s|**gamma)``).  The other
        families take no parameters.  Whatever the raw parameters, the
        sampled field is rescaled to unit variance.
    concentration_class : float, optional
        Concentration exponent of the law.  Stored as metadata only.
    """

    family: str = GAUSSIAN
    params: tuple = ()
    concentration_class: Optional[float] = None
    _scale: float = field(default=1.0, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.family not in _FAMILY_CODE:
            raise ParameterError(f"unknown disorder family {self.family!r}")
        params = tuple(float(p) for p in self.params)
        object.__setattr__(self, "params", params)
        if self.family in (GAUSSIAN, RADEMACHER) and params:
            raise ParameterError(f"{self.family} takes no parameters")
        if self.family == UNIFORM:
            if len(params) > 1 or (params and not params[0] > 0):
                raise ParameterError("uniform-symmetric needs one half-width a > 0")
        if self.family == EXPTAIL:
            if len(params) != 1:
                raise ParameterError("centered-exponential-tail needs the exponent gamma")
            g = params[0]
            if not g > 1.0 or not math.isfinite(g):
                # gamma <= 1 has exponential moments only on a bounded interval
                raise ParameterError(
                    f"tail exponent gamma={g} gives an infinite exponential moment; need gamma > 1")
            scale = math.sqrt(math.exp(special.gammaln(1.0 / g) - special.gammaln(3.0 / g)))
            object.__setattr__(self, "_scale", scale)
        cc = self.concentration_class
        if cc is not None and not cc >= 1.0:
            raise ParameterError("concentration_class must be >= 1")

    @property
    def code(self) -> int:
        return _FAMILY_CODE[self.family]

    @property
    def kernel_params(self):
        """(p0, p1) as consumed by the compiled generators."""
        if self.family == EXPTAIL:
            return self.params[0], self._scale
        return 0.0, 0.0

    @property
    def bounded(self) -> bool:
        return self.family in (RADEMACHER, UNIFORM)

    def to_dict(self):
        d = {"family": self.family, "params": list(self.params)}
        if self.concentration_class is not None:
            d["concentration_class"] = self.concentration_class
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(d.get("family", GAUSSIAN), tuple(d.get("params", ())),
                   d.get("concentration_class"))


def _exptail_log_mgf(gamma, s, beta):
    # density exp(-|x/s|^g) / (2 s Gamma(1 + 1/g)); the mgf is E cosh(beta X)
    b = abs(beta)
    lognorm = math.log(2.0 * s) + special.gammaln(1.0 + 1.0 / gamma)
    opts = dict(epsabs=0.0, epsrel=1e-13, limit=400)
    if b <= 1.0:
        # cosh - 1 = 2 sinh^2(bx/2) keeps full relative accuracy as b -> 0
        def f(x):
            u = 0.5 * b * x
            if u < 1.0:
                return 2.0 * math.sinh(u) ** 2 * math.exp(-(x / s) ** gamma)
            log2sh2 = 2.0 * u - _LOG2 + 2.0 * math.log1p(-math.exp(-2.0 * u))
            return math.exp(log2sh2 - (x / s) ** gamma)
        val, _ = integrate.quad(f, 0.0, np.inf, **opts)
        return math.log1p(2.0 * math.exp(math.log(val) - lognorm)) if val > 0 else 0.0
    # shift by the peak of b x - (x/s)^g to keep the integrand O(1)
    xs = (b * s ** gamma / gamma) ** (1.0 / (gamma - 1.0))
    gs = b * xs - (xs / s) ** gamma
    fp = lambda x: math.exp(b * x - (x / s) ** gamma - gs)
    fm = lambda x: math.exp(-b * x - (x / s) ** gamma - gs)
    ip = integrate.quad(fp, 0.0, xs, **opts)[0] + integrate.quad(fp, xs, np.inf, **opts)[0]
    im, _ = integrate.quad(fm, 0.0, np.inf, **opts)
    return gs + math.log(ip + im) - lognorm


def cumulant(spec: EnvironmentSpec, beta: float) -> float:
    """lambda(beta) = log E[exp(beta * eta)] for the standardized law."""
    beta = float(beta)
    if beta == 0.0:
        return 0.0
    fam = spec.family
    if fam == GAUSSIAN:
        val = 0.5 * beta * beta
    elif fam == RADEMACHER:
        val = _log_cosh(beta)
    elif fam == UNIFORM:
        val = _log_sinhc(_SQRT3 * beta)
    else:
        val = _exptail_log_mgf(spec.params[0], spec._scale, beta)
    if not math.isfinite(val):
        raise ParameterError(f"lambda({beta}) is not finite for {fam}")
    return val


def collision_exponent(spec: EnvironmentSpec, beta: float) -> float:
    """kappa = lambda(2 beta) - 2 lambda(beta), so E[zeta^2] = exp(kappa)."""
    if spec.family == GAUSSIAN:
        return float(beta) ** 2
    return cumulant(spec, 2.0 * beta) - 2.0 * cumulant(spec, beta)


@dataclass(frozen=True)
class FieldHandle:
    """The field eta(n, x), n >= 1, determined by (seed, spec)."""

    seed: int
    spec: EnvironmentSpec = EnvironmentSpec()

    def __post_init__(self):
        object.__setattr__(self, "seed", int(self.seed) & 0xFFFFFFFFFFFFFFFF)

    @property
    def useed(self):
        return np.uint64(self.seed)

    def kernel_args(self, beta):
        """Positional arguments shared by the compiled sweeps."""
        p0, p1 = self.spec.kernel_params
        return (self.useed, self.spec.code, p0, p1, float(beta), cumulant(self.spec, beta))

    def values(self, ns, xs):
        ns, xs = _check_sites(ns, xs)
        p0, p1 = self.spec.kernel_params
        return _rng.raw_values(self.useed, self.spec.code, p0, p1, ns, xs)

    def zetas(self, beta, ns, xs):
        ns, xs = _check_sites(ns, xs)
        return _rng.zeta_values(*self.kernel_args(beta), ns, xs)


def _check_sites(ns, xs):
    ns = np.atleast_1d(np.asarray(ns, dtype=np.int64))
    xs = np.atleast_1d(np.asarray(xs, dtype=np.int64))
    ns, xs = np.broadcast_arrays(ns, xs)
    if ns.size and ns.min() < 1:
        raise DomainError("the environment starts at time n = 1")
    return np.ascontiguousarray(ns), np.ascontiguousarray(xs)


def site_value(handle: FieldHandle, n: int, x: int) -> float:
    """eta(n, x) for the field of ``handle``."""
    if n < 1:
        raise DomainError("the environment starts at time n = 1")
    p0, p1 = handle.spec.kernel_params
    return float(_rng.raw_value(handle.useed, handle.spec.code, p0, p1, int(n), int(x)))


def zeta(handle: FieldHandle, beta: float, n: int, x: int) -> float:
    """exp(beta * eta(n, x) - lambda(beta)); exactly 1 at beta = 0."""
    if n < 1:
        raise DomainError("the environment starts at time n = 1")
    return float(handle.zetas(beta, [n], [x])[0])


def centered_weight(handle: FieldHandle, beta: float, n: int, x: int) -> float:
    """zeta - 1, evaluated with expm1."""
    if beta == 0:
        if n < 1:
            raise DomainError("the environment starts at time n = 1")
        return 0.0
    return math.expm1(beta * site_value(handle, n, x) - cumulant(handle.spec, beta))


def make_spec(family: str = GAUSSIAN, params: Sequence[float] = (), **kw) -> EnvironmentSpec:
    return EnvironmentSpec(family, tuple(params), **kw)
