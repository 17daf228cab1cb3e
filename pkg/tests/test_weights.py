import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from capiso.weights import (DomainError, am_gm_gap, constant, eval_weight, fd_gradient, gradient_weight,
                            monomial_product, monomial_xn, parse_weight, radial, validate_weight)


def test_monomial_value_and_homogeneity():
    w = monomial_xn(1.0)
    assert eval_weight(w, [0.3, 0.7]) == pytest.approx(0.7)
    assert eval_weight(w, [0.6, 1.4]) == pytest.approx(1.4)
    assert eval_weight(constant(), [5.0, -3.0]) == 1.0


def test_gradients():
    assert np.allclose(gradient_weight(monomial_xn(1.0), [0.3, 0.7]), [0.0, 1.0])
    assert np.allclose(gradient_weight(constant(), [0.3, 0.7]), [0.0, 0.0])
    w = monomial_product([1.0, 1.0])
    assert np.allclose(gradient_weight(w, [2.0, 3.0]), [3.0, 2.0])
    assert np.allclose(fd_gradient(w.eval, np.array([[2.0, 3.0]])), [[3.0, 2.0]], atol=1e-6)


def test_non_finite_input_is_rejected():
    with pytest.raises(DomainError):
        eval_weight(constant(), [np.nan, 0.0])


def test_gradient_on_vanishing_boundary_warns():
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        gradient_weight(monomial_xn(0.5), [0.3, 0.0])
    assert rec


def test_linear_root_gives_equality_in_concavity_criterion():
    rep = validate_weight(monomial_xn(1.0), 2000, 0, n=2)
    assert rep.passed
    assert rep["concavity_criterion"].value == pytest.approx(0.0, abs=1e-9)


def test_radial_weight_fails_concavity_with_witness():
    rep = validate_weight(radial(1.0), 2000, 0, n=2)
    c = rep["concavity_criterion"]
    assert not c.passed
    assert c.witness is not None and c.value < 0


def test_am_gm_equality_case():
    assert float(am_gm_gap(1.0, 1.0, 1.0, 2)) == pytest.approx(0.0, abs=1e-15)


@given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3), st.floats(0.1, 5.0), st.integers(1, 6))
@settings(max_examples=300, deadline=None)
def test_am_gm_gap_nonnegative_and_zero_only_on_diagonal(s, t, alpha, n):
    g = float(am_gm_gap(s, t, alpha, n))
    assert g >= -1e-12
    if abs(s - t) > 1e-3 * max(s, t):
        assert g > 0


@given(st.lists(st.floats(0.1, 3.0), min_size=2, max_size=2), st.floats(0.1, 10.0),
       st.sampled_from(["const", "monomial:xn:1", "monomial:xn:2.5", "monomial:product:1,2", "radial:1.5"]))
@settings(max_examples=200, deadline=None)
def test_homogeneity(x, t, spec):
    w = parse_weight(spec)
    x = np.array([x])
    assert w.eval(t * x)[0] == pytest.approx(t ** w.alpha * w.eval(x)[0], rel=1e-12)


def test_parse_round_trip_and_errors():
    for spec in ["const", "monomial:xn:1", "monomial:product:1,2", "radial:2"]:
        assert parse_weight(spec).spec == spec
    with pytest.raises(ValueError, match="weight"):
        parse_weight("xn^2")
