import math

import numpy as np
import pytest

from dprelab import _rng
from dprelab.coarse_grain import block_range, reachable_blocks, start_sites
from dprelab.env_field import EnvironmentSpec, FieldHandle
from dprelab.errors import ConfigError, DomainError
from dprelab.free_energy import (beta_sweep, block_maximum_statistic, default_N, estimate_free_energy,
                                 fractional_upper, replica_log_partitions, resolve_schedule,
                                 summarize_fractional, summarize_variance, variance_profile)
from dprelab.kernels import srw_kernel
from dprelab.transfer import log_partition

G = EnvironmentSpec()


def test_beta_zero_is_exactly_zero():
    est = estimate_free_energy(G, 0.0, 50, 8, seed=1)
    assert est.mean == 0.0 and est.std_error == 0.0
    assert np.all(est.samples == 0.0)


def test_replicas_match_single_field_sweeps():
    lw = replica_log_partitions(G, 0.7, 40, seed=9, start=3, count=4)
    for i, v in enumerate(lw):
        h = FieldHandle(_rng.derive_seed(9, 3 + i))
        assert v == log_partition(h, 0.7, 40)


def test_replica_ranges_concatenate():
    full = replica_log_partitions(G, 0.6, 30, seed=2, start=0, count=10)
    parts = np.concatenate([replica_log_partitions(G, 0.6, 30, 2, s, 5) for s in (0, 5)])
    assert np.array_equal(full, parts)


def test_lower_bracket_negative():
    est = estimate_free_energy(G, 0.8, 300, 64, seed=3)
    assert est.mean + 3 * est.std_error < 0
    lo, hi = est.ci95
    assert lo < est.mean < hi


def test_schedule_resolution():
    assert resolve_schedule([0.5]) == [default_N(0.5)] == [1600]
    assert resolve_schedule([0.5], 10.0) == [160]
    assert resolve_schedule([0.5], {0.5: 20}) == [20]
    assert resolve_schedule([0.5], lambda b: 17) == [17]
    with pytest.raises(ConfigError) as e:
        resolve_schedule([0.5], {0.5: 10})
    assert e.value.field == "N_of_beta[0.5]"
    with pytest.raises(ConfigError) as e:
        resolve_schedule([0.5, 0.4], {0.5: 100})
    assert e.value.field == "N_of_beta"


def test_sweep_rows():
    rows = beta_sweep(G, [0.9, 0.8], 5.0, replicas=8, seed=1)
    for r in rows:
        d = r.to_dict()
        b = d["beta"]
        assert d["N"] == default_N(b, 5.0)
        assert d["Fhat_over_beta4"] == pytest.approx(d["Fhat"] / b ** 4)
        assert d["ratio_ci_lo"] < d["Fhat_over_beta4"] < d["ratio_ci_hi"]


def _fractional_beta0_oracle(theta, T, n):
    N = T * n
    tot = 0.0
    for z in reachable_blocks(T, n):
        lo, hi = block_range(int(z), n)
        best = max(sum(srw_kernel(N, y - int(x)) for y in range(lo, hi + 1)) for x in start_sites(n))
        tot += best ** theta
    return math.log(tot) / (theta * T * n)


@pytest.mark.parametrize("theta,T,n", [(0.5, 2, 16), (0.3, 3, 9), (0.9, 1, 25)])
def test_fractional_upper_beta_zero(theta, T, n):
    res = fractional_upper(G, 0.0, theta, T, n, replicas=4, seed=0)
    assert res.value == pytest.approx(_fractional_beta0_oracle(theta, T, n), rel=1e-9)
    assert res.value > 0
    assert res.std_error == 0.0


def test_fractional_domain():
    with pytest.raises(DomainError):
        fractional_upper(G, 0.5, 1.0, 2, 16, 4, 0)
    with pytest.raises(DomainError):
        fractional_upper(G, 0.5, 0.0, 2, 16, 4, 0)
    res = block_maximum_statistic(G, 0.5, 2, 16, 8, 0)
    assert res.theta == 1.0 and math.isfinite(res.value)


def test_fractional_jackknife():
    S = np.array([1.0, 2.0, 4.0, 8.0])
    r = summarize_fractional(S, 0.5, 0.5, 2, 4, 0, 3)
    scale = 1 / (0.5 * 2 * 4)
    assert r.value == pytest.approx(scale * math.log(S.mean()))
    loo = [(S.sum() - s) / 3 for s in S]
    assert r.jackknife_bias == pytest.approx(3 * (np.mean([scale * math.log(v) for v in loo]) - r.value))


def test_variance_standard_error():
    rng = np.random.default_rng(0)
    x = rng.normal(0, 2.0, 20000)
    row = summarize_variance(x, 10)
    assert row.variance == pytest.approx(4.0, rel=0.03)
    assert row.variance_over_N == pytest.approx(row.variance / 10)
    # normal data: sd of the sample variance is sigma^2 sqrt(2 / R)
    assert row.std_error == pytest.approx(4.0 * math.sqrt(2 / 20000), rel=0.05)


def test_variance_profile_grid():
    rows = variance_profile(G, 0.7, [10, 20, 40], replicas=16, seed=2)
    assert [r.N for r in rows] == [10, 20, 40]
    assert all(r.variance > 0 for r in rows)
