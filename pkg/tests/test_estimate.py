import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from capiso.estimate import (CheckResult, Estimate, ValidationReport, combine, mc_estimates, ratio_power,
                             sample_means)


def unit_square(rng, m):
    return rng.uniform(size=(m, 2)), np.ones(m)


def test_same_seed_gives_identical_estimate():
    f = lambda x: np.exp(x[:, 0] * x[:, 1])
    a = mc_estimates(f, unit_square, 50_000, 11)[0]
    b = mc_estimates(f, unit_square, 50_000, 11)[0]
    c = mc_estimates(f, unit_square, 50_000, 12)[0]
    assert a == b
    assert a.value != c.value


def test_mean_of_known_integral_within_three_sigma():
    est = mc_estimates(lambda x: x[:, 0] ** 2, unit_square, 200_000, 3)[0]
    assert est.contains(1.0 / 3.0)


def test_batching_does_not_change_the_stream_for_one_batch_size():
    f = lambda x: x[:, 0]
    m1, _ = sample_means(f, unit_square, 10_000, 5, batch_size=10_000)
    m2, _ = sample_means(f, unit_square, 10_000, 5, batch_size=10_000)
    assert m1[0] == m2[0]


def test_covariance_matches_sample_variance():
    mean, cov = sample_means(lambda x: np.column_stack([x[:, 0], 2 * x[:, 0]]), unit_square, 100_000, 1)
    assert cov[0, 1] == pytest.approx(2 * cov[0, 0], rel=1e-9)
    assert cov[0, 0] == pytest.approx(1 / 12 / 100_000, rel=0.05)


def test_combine_propagates_independent_errors():
    a, b = Estimate(1.0, 0.3), Estimate(2.0, 0.4)
    c = combine(3.0, [a, b])
    assert c.std_error == pytest.approx(0.5)
    d = a - b
    assert d.value == -1.0 and d.std_error == pytest.approx(0.5)


def test_ratio_power_matches_finite_difference_gradient():
    cov = np.array([[0.04, 0.01], [0.01, 0.09]])
    val, se = ratio_power(2.0, 3.0, 0.5, cov)
    assert val == pytest.approx(2.0 / math.sqrt(3.0))
    g = np.array([1 / math.sqrt(3.0), -0.5 * 2.0 / 3.0 ** 1.5])
    assert se == pytest.approx(math.sqrt(g @ cov @ g))


def test_z_score_with_zero_error():
    assert Estimate(0.0, 0.0).z_score(0.0) == 0.0
    assert Estimate(1.0, 0.0).z_score(0.0) == math.inf


def test_report_passes_only_when_all_unskipped_checks_pass():
    rep = ValidationReport("x")
    rep.add(CheckResult("a", True, 0.0))
    rep.add(CheckResult("b", False, 0.0, skipped=True))
    assert rep.passed
    rep.add(CheckResult("c", False, 0.0, witness={"x": np.array([1.0, 2.0])}))
    assert not rep.passed
    assert '"witness"' in rep.to_json()
    assert rep["c"].witness["x"][1] == 2.0


@given(st.floats(-1e3, 1e3), st.floats(1e-6, 1e3), st.floats(0.1, 100.0))
@settings(max_examples=200, deadline=None)
def test_scaling_preserves_z_score(value, se, c):
    est = Estimate(value, se)
    assert est.scaled(c).z_score(0.0) == pytest.approx(est.z_score(0.0), rel=1e-9, abs=1e-12)
