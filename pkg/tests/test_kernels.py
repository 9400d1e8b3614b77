import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from dprelab import kernels
from dprelab.errors import DomainError
from dprelab.kernels import (IDENTITIES, IDENTITY_KIND, calibrate_llt_constant, heat_kernel,
                             identity_suite, llt_difference_bound, llt_grid, srw_kernel,
                             srw_kernel_exact, srw_row, verify_identity)


def test_srw_small_values():
    assert srw_kernel(0, 0) == 1.0
    assert srw_kernel(4, 0) == 0.375
    assert srw_kernel(4, 2) == 0.25
    assert srw_kernel(4, 1) == 0.0
    assert srw_kernel(3, 5) == 0.0
    assert srw_kernel_exact(6, 2) == Fraction(15, 64)


@given(st.integers(0, 3000), st.integers(-3000, 3000))
def test_srw_matches_exact(n, x):
    assert srw_kernel(n, x) == pytest.approx(float(srw_kernel_exact(n, x)), rel=1e-12, abs=0)


@pytest.mark.parametrize("n", [1, 7, 100, 1001, 5000])
def test_srw_row_normalized(n):
    p = srw_row(n)
    assert p.size == n + 1
    assert math.fsum(p) == pytest.approx(1.0, abs=1e-13)
    assert np.allclose(p, p[::-1], rtol=1e-12, atol=1e-300)


def test_heat_kernel():
    assert heat_kernel(1.0, 0.0) == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-15)
    val, _ = integrate.quad(lambda x: heat_kernel(0.7, x), -np.inf, np.inf)
    assert val == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(DomainError):
        heat_kernel(0.0, 1.0)


@given(st.floats(0.05, 4), st.floats(0.05, 4), st.floats(-3, 3), st.floats(-3, 3))
def test_hconv_against_direct_quadrature(s, t, x, z):
    lhs, rhs = verify_identity("hconv", [s, t, x, z])
    direct = integrate.quad(lambda y: heat_kernel(s, x - y) * heat_kernel(t, y - z), -np.inf, np.inf,
                            epsabs=1e-14)[0]
    assert lhs == pytest.approx(direct, rel=1e-8, abs=1e-14)
    assert rhs == pytest.approx(heat_kernel(s + t, x - z), rel=1e-14)


@given(st.floats(0.05, 4), st.floats(-3, 3))
def test_hsqare_and_hest(t, x):
    lhs, rhs = verify_identity("hsqare", [t, x])
    assert lhs == pytest.approx(rhs, rel=1e-12)
    lhs, bound = verify_identity("hest", [t, x])
    assert lhs <= bound
    assert bound == pytest.approx(2 * abs(x) / math.sqrt(math.pi), rel=1e-15)


def test_hest_middle_equality():
    # the intermediate expression equals the integral exactly
    for t, x in [(0.3, 1.2), (2.0, -0.4), (1.0, 2.5)]:
        lhs, _ = verify_identity("hest", [t, x])
        assert kernels.hest_middle(t, x) == pytest.approx(lhs, rel=1e-10)


def test_identity_suite_small():
    rows = list(identity_suite(draws=4, seed=3))
    assert {r["identity"] for r in rows} == set(IDENTITIES)
    assert len(rows) == 4 * len(IDENTITIES)
    assert all(r["passed"] for r in rows)
    for r in rows:
        if r["kind"] == kernels.EQUALITY:
            assert abs(r["lhs"] - r["rhs"]) < 1e-8


@pytest.mark.parametrize("name", ["hfull", "hfull2"])
def test_monte_carlo_mode_consistent(name):
    p = [2, 0.3, 1.4, 0.5, -0.2] if name == "hfull" else [2, 0.3, 1.4, 0.5]
    exact = verify_identity(name, p)
    res, se = verify_identity(name, p, method="mc", rng=1, samples=100_000)
    assert abs(res.lhs - exact.lhs) < 4 * se


def test_domain_checks():
    with pytest.raises(DomainError):
        verify_identity("nope", [1])
    with pytest.raises(DomainError):
        verify_identity("hsqare", [-1.0, 0.0])
    with pytest.raises(DomainError):
        verify_identity("hsqconv", [2, 0.0, 1.0, 0.5, 2.0, 0, 0])
    with pytest.raises(DomainError):
        verify_identity("hfull", [0, 0.0, 1.0, 0.0, 0.0])
    assert set(IDENTITY_KIND.values()) == {kernels.EQUALITY, kernels.INEQUALITY}


def test_llt_corrected_form():
    c = calibrate_llt_constant("corrected")
    assert 0.1 < c < 0.3
    for n, x, y in llt_grid():
        lhs, rhs = llt_difference_bound(n, x, y, form="corrected")
        assert lhs <= rhs * (1 + 1e-12)


def test_llt_printed_form_constant_not_uniform():
    # the constant needed by the printed bound grows with n
    grid = llt_grid()
    small = calibrate_llt_constant("printed", [g for g in grid if g[0] <= 100])
    large = calibrate_llt_constant("printed", [g for g in grid if g[0] >= 5000])
    assert large > 5 * small
    # at x = 0 the printed bound has no c term and fails outright
    lhs, rhs = llt_difference_bound(100, 0, 2, c=1e6, form="printed")
    assert lhs > rhs


def test_llt_parity_checks():
    with pytest.raises(DomainError):
        llt_difference_bound(11, 1, 2)
    with pytest.raises(DomainError):
        llt_difference_bound(10, 0, 3)
