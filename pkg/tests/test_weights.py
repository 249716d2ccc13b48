import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracle import lam_numeric
from wate_tmle.weights import LambdaBounds, WeightSpec, frak_c, lambda_bounds, lambda_eval, parse_weight

CATALOG = [
    WeightSpec("ATE"),
    WeightSpec("ATT"),
    WeightSpec("ATC"),
    WeightSpec("ATO"),
    WeightSpec("ATEN"),
    WeightSpec("ATB", nu1=2.5, nu2=3.0),
    WeightSpec("ATB", nu1=1.5, nu2=4.0),
    WeightSpec("SmoothTrim", alpha=0.1, eps=0.05),
]


def _params(w):
    if w.kind == "ATB":
        return w.nu1, w.nu2
    if w.kind == "SmoothTrim":
        return w.alpha, w.eps
    return None, None


def test_catalog_values():
    assert lambda_eval(WeightSpec("ATT"), 0.3) == pytest.approx(0.3, abs=1e-15)
    assert lambda_eval(WeightSpec("ATO"), 0.5) == pytest.approx(0.25, abs=1e-15)
    assert lambda_eval(WeightSpec("ATO"), 0.5, 1) == pytest.approx(0.0, abs=1e-15)
    assert lambda_eval(WeightSpec("ATEN"), 0.5) == pytest.approx(math.log(2.0), abs=1e-15)
    t = np.linspace(0.01, 0.99, 17)
    np.testing.assert_array_equal(lambda_eval(WeightSpec("ATE"), t, 1), 0.0)


@pytest.mark.parametrize("w", CATALOG, ids=lambda w: w.label)
def test_against_symbolic_derivatives(w):
    p1, p2 = _params(w)
    for t in (0.07, 0.23, 0.5, 0.61, 0.88):
        for order in range(4):
            ref = lam_numeric(w.kind, t, order, p1, p2)
            assert lambda_eval(w, t, order) == pytest.approx(ref, rel=1e-10, abs=1e-12)


@pytest.mark.parametrize("w", CATALOG, ids=lambda w: w.label)
def test_finite_difference_of_each_order(w):
    t = np.linspace(0.05, 0.95, 181)
    h = 1e-6
    for k in range(3):
        fd = (lambda_eval(w, t + h, k) - lambda_eval(w, t - h, k)) / (2 * h)
        exact = lambda_eval(w, t, k + 1)
        scale = np.maximum(np.abs(exact), 1.0)
        assert np.max(np.abs(fd - exact) / scale) < 1e-6


def test_nonnegative_on_open_interval():
    t = np.linspace(1e-6, 1 - 1e-6, 2001)
    for w in CATALOG:
        assert np.all(lambda_eval(w, t) >= 0.0)


@pytest.mark.parametrize("nu, name", [((1, 1), "ATE"), ((2, 1), "ATT"), ((1, 2), "ATC"), ((2, 2), "ATO")])
def test_beta_special_cases(nu, name):
    t = np.linspace(0.01, 0.99, 99)
    b = WeightSpec("ATB", nu1=nu[0], nu2=nu[1])
    for order in range(4):
        np.testing.assert_allclose(lambda_eval(b, t, order), lambda_eval(WeightSpec(name), t, order), atol=1e-14)


def test_eval_errors():
    with pytest.raises(ValueError):
        lambda_eval(WeightSpec("ATO"), 0.5, 4)
    for bad in (0.0, 1.0, -0.1, 1.3):
        with pytest.raises(ValueError):
            lambda_eval(WeightSpec("ATO"), bad)
    with pytest.raises(ValueError):
        WeightSpec("ATB", nu1=0.5, nu2=2.0)
    with pytest.raises(ValueError):
        WeightSpec("SmoothTrim", alpha=0.6)
    with pytest.raises(ValueError):
        WeightSpec("ATM")


@pytest.mark.parametrize(
    "w, eta, expected",
    [
        (WeightSpec("ATE"), 0.1, (1, 1, 0, 0, 0)),
        (WeightSpec("ATO"), 0.1, (0.09, 0.25, 0.8, 2, 0)),
        (WeightSpec("ATT"), 0.2, (0.2, 0.8, 1, 0, 0)),
    ],
)
def test_bounds_examples(w, eta, expected):
    b = lambda_bounds(w, eta)
    got = (b.lambda_min, b.lambda_max, b.d1_max, b.d2_max, b.d3_max)
    np.testing.assert_allclose(got, expected, atol=1e-15)


@pytest.mark.parametrize("w, eta, c", [(WeightSpec("ATE"), 0.1, 0.1), (WeightSpec("ATO"), 0.1, 0.09),
                                       (WeightSpec("ATT"), 0.2, 0.2)])
def test_frak_c_examples(w, eta, c):
    assert frak_c(lambda_bounds(w, eta)) == pytest.approx(c, abs=1e-15)


@pytest.mark.parametrize("w", CATALOG, ids=lambda w: w.label)
def test_frak_c_defining_inequalities(w):
    b = lambda_bounds(w, 0.1)
    c = frak_c(b)
    big = max(b.lambda_max, b.d1_max, b.d2_max, b.d3_max, b.eta)
    assert c <= b.lambda_min and c <= b.eta and c * big <= 1.0 + 1e-15
    assert min(abs(c - b.lambda_min), abs(c - b.eta), abs(c * big - 1.0)) < 1e-15


def test_grid_bounds_close_to_dense_reference():
    w = WeightSpec("ATEN")
    b = lambda_bounds(w, 0.05)
    t = np.linspace(0.05, 0.95, 400_001)
    assert b.lambda_min == pytest.approx(lambda_eval(w, t).min(), abs=1e-9)
    assert b.d3_max == pytest.approx(np.abs(lambda_eval(w, t, 3)).max(), rel=1e-9)


def test_bounds_errors():
    with pytest.raises(ValueError):
        lambda_bounds(WeightSpec("ATE"), 0.3)
    with pytest.raises(ValueError):
        LambdaBounds(1.0, 0.5, 0, 0, 0, 0.1)
    with pytest.raises(ValueError):
        LambdaBounds(0.1, math.inf, 0, 0, 0, 0.1)
    with pytest.raises(ValueError):
        frak_c(LambdaBounds(0.0, 1.0, 0, 0, 0, 0.1))


def test_parse_weight_grammar():
    assert parse_weight("ato") == WeightSpec("ATO")
    assert parse_weight("atb:2.5,3.0") == WeightSpec("ATB", nu1=2.5, nu2=3.0)
    assert parse_weight("smoothtrim:0.1,0.01") == WeightSpec("SmoothTrim", alpha=0.1, eps=0.01)
    assert parse_weight("atb:2.5,3.0").label == "atb:2.5,3.0"
    for bad in ("atm", "attz", "trate"):
        with pytest.raises(ValueError, match="not supported"):
            parse_weight(bad)
    for bad in ("ato:1", "atb:2", "atb:x,y", "foo"):
        with pytest.raises(ValueError):
            parse_weight(bad)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.001, 0.999), st.floats(1.0, 6.0), st.floats(1.0, 6.0))
def test_beta_weight_positive_and_c3(t, nu1, nu2):
    w = WeightSpec("ATB", nu1=nu1, nu2=nu2)
    assert lambda_eval(w, t) > 0.0
    for order in range(4):
        assert math.isfinite(lambda_eval(w, t, order))
