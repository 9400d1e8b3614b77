import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from dprelab.coarse_grain import block_range
from dprelab.continuum_scaling import (POINT_TO_POINT, IntermediateConfig, chapman_kolmogorov_check,
                                       continuum_free_energy, continuum_second_moment,
                                       intermediate_partition, intermediate_samples,
                                       intermediate_second_moment, richardson, scaling_distribution_check,
                                       second_moment_series, second_moment_terms)
from dprelab.env_field import EnvironmentSpec, FieldHandle
from dprelab.errors import DomainError
from dprelab.kernels import srw_kernel
from dprelab.transfer import log_partition, second_moment_exact

from oracles import brute_partition

# e (1 + erf 1) to 16 digits, from mpmath at 30 digits
SERIES_AT_SQRT2_1 = 5.008980080762283


def test_series_headline_value():
    s = second_moment_series(math.sqrt(2), 1.0, 80)
    assert s.value == pytest.approx(SERIES_AT_SQRT2_1, rel=1e-15)
    assert continuum_second_moment(math.sqrt(2), 1.0) == pytest.approx(SERIES_AT_SQRT2_1, rel=1e-15)
    mpmath.mp.dps = 30
    assert float(mpmath.e * (1 + mpmath.erf(1))) == SERIES_AT_SQRT2_1


@given(st.floats(0.05, 3.0), st.floats(0.05, 10.0))
def test_series_closed_form(beta, T):
    # sum_k x^k / Gamma(k/2 + 1) = e^{x^2} (1 + erf x), x = beta^2 sqrt(T) / 2
    x = beta * beta * math.sqrt(T) / 2
    ref = math.exp(x * x) * (1 + math.erf(x))
    assert second_moment_series(beta, T, 600).value == pytest.approx(ref, rel=1e-12)


def test_series_early_stop_and_domain():
    s = second_moment_series(0.3, 0.5, 100_000)
    assert s.stopped_early and s.terms < 100_000
    assert second_moment_series(0.0, 1.0, 5).value == 1.0
    t = second_moment_terms(1.0, 1.0, 3)
    assert t[0] == 1.0 and t[2] == pytest.approx(0.25, rel=1e-15)
    with pytest.raises(DomainError):
        second_moment_series(1.0, 1.0, 0)
    with pytest.raises(DomainError):
        second_moment_series(1.0, -1.0, 5)


def test_intermediate_config():
    c = IntermediateConfig(2.5, 64, r=0.5)
    assert c.N == 160
    assert c.beta == pytest.approx(0.5 * 64 ** -0.25)
    with pytest.raises(DomainError):
        IntermediateConfig(0.001, 10)
    with pytest.raises(DomainError):
        IntermediateConfig(1.0, 16, kind="point-to-circle")


def test_samples_match_direct_sweeps():
    cfg = IntermediateConfig(1.0, 64, 1.0, replicas=6, seed=3)
    lw = intermediate_samples(cfg)
    assert np.all(intermediate_samples(IntermediateConfig(1.0, 64, 0.0, 6, 3)) == 0)
    from dprelab import _rng
    for i in range(6):
        h = FieldHandle(_rng.derive_seed(3, i))
        assert lw[i] == log_partition(h, cfg.beta, cfg.N)
        assert intermediate_partition(cfg, h) == lw[i]


def test_point_to_point_against_enumeration():
    cfg = IntermediateConfig(1.0, 9, 1.0, replicas=3, seed=1, kind=POINT_TO_POINT)
    lo, hi = block_range(0, 9)
    mass = sum(srw_kernel(9, y) for y in range(lo, hi + 1))
    h = FieldHandle(77)
    ref = brute_partition(h, cfg.beta, 9, endpoints=range(lo, hi + 1)) / mass
    assert abs(intermediate_partition(cfg, h) - math.log(ref)) < 1e-12


@pytest.mark.parametrize("seed", range(5))
def test_chapman_kolmogorov(seed):
    h = FieldHandle(seed)
    for m in (1, 4, 9):
        r = chapman_kolmogorov_check(h, 0.9, 10, m)
        assert abs(r.log_lhs - r.log_rhs) < 1e-12
    with pytest.raises(DomainError):
        chapman_kolmogorov_check(h, 0.9, 10, 10)


def test_continuum_estimate_fields():
    est = continuum_free_energy(IntermediateConfig(1.0, 16, 1.0, replicas=32, seed=2))
    assert est.doubling_delta is not None and est.doubling_stderr > est.std_error
    assert est.bias_band == abs(est.doubling_delta)
    zero = continuum_free_energy(IntermediateConfig(1.0, 16, 0.0, replicas=32, seed=2))
    assert zero.mean_log == 0.0 and zero.bias_band == 0.0
    with pytest.raises(DomainError):
        continuum_free_energy(IntermediateConfig(1.0, 16, 1.0, replicas=8))


def test_scaling_check():
    rep = scaling_distribution_check(1.0, 16, 1.0, 64, seed=0, matched_seeds=True)
    assert rep.ks_statistic == 0.0
    rep = scaling_distribution_check(1.0, 16, 0.7, 64, seed=0)
    assert 0 <= rep.p_value <= 1 and rep.replicas == 64
    with pytest.raises(DomainError):
        scaling_distribution_check(1.0, 16, 3.0, 16, 0)


def test_second_moment_estimate_has_exact_column():
    cfg = IntermediateConfig(1.0, 16, 1.0, replicas=200, seed=5)
    m = intermediate_second_moment(cfg)
    assert m.exact_second == second_moment_exact(EnvironmentSpec(), cfg.beta, cfg.N)
    assert abs(m.mean - 1) < 5 * m.mean_stderr


def test_richardson_recovers_limit():
    ns = [64, 256, 1024]
    vals = [5.0 - 10 * n ** -0.5 for n in ns]
    lim, se = richardson(ns, vals, [0.01, 0.01, 0.01])
    assert lim == pytest.approx(5.0, abs=1e-12)
    assert se > 0
