import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracle import cox_de_boor
from wate_tmle.model import Dataset
from wate_tmle.splines import (
    SplineBasisSpec, SplineFit, SplineFitter, basis_eval, design_matrix, fit_nuisances, j_rule,
    least_squares_min_norm, truncate,
)


def test_knots_and_size():
    s = SplineBasisSpec(3, 6, 2)
    np.testing.assert_allclose(s.knots, [0, 0, 0, 0, 1 / 3, 2 / 3, 1, 1, 1, 1])
    assert s.K == 36
    with pytest.raises(ValueError):
        SplineBasisSpec(3, 3, 1)


def test_linear_hat_examples():
    s = SplineBasisSpec(1, 2, 1)
    np.testing.assert_allclose(basis_eval(s, [0.0]), [1.0, 0.0])
    np.testing.assert_allclose(basis_eval(s, [0.5]), [0.5, 0.5])


@pytest.mark.parametrize("degree, J", [(1, 2), (2, 5), (3, 4), (3, 7)])
def test_matches_recursion(degree, J):
    s = SplineBasisSpec(degree, J, 1)
    knots = s.knots.tolist()
    for x in np.linspace(0, 1, 23):
        ref = [cox_de_boor(knots, degree, j, x) for j in range(J)]
        np.testing.assert_allclose(basis_eval(s, [x]), ref, atol=1e-14)


def test_tensor_product_structure(rng):
    s1 = SplineBasisSpec(3, 5, 1)
    s2 = SplineBasisSpec(3, 5, 2)
    x = rng.random(2)
    np.testing.assert_allclose(basis_eval(s2, x), np.outer(basis_eval(s1, x[:1]), basis_eval(s1, x[1:])).ravel(),
                               atol=1e-15)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=2, max_size=2), st.integers(1, 4), st.integers(0, 4))
def test_partition_of_unity(x, degree, extra):
    s = SplineBasisSpec(degree, degree + 1 + extra, 2)
    b = basis_eval(s, x)
    assert np.all(b >= 0.0)
    assert b.sum() == pytest.approx(1.0, abs=1e-13)


def test_domain_errors():
    s = SplineBasisSpec(3, 4, 1)
    with pytest.raises(ValueError):
        design_matrix(s, [[1.2]])
    with pytest.raises(ValueError):
        design_matrix(s, [[0.2, 0.3]])


def test_min_norm_examples(rng):
    r = rng.normal(size=5)
    np.testing.assert_allclose(least_squares_min_norm(np.eye(5), r).coef, r, atol=1e-14)
    z = least_squares_min_norm(np.zeros((4, 3)), r[:4])
    np.testing.assert_array_equal(z.coef, 0.0)
    assert z.rank_deficient
    assert least_squares_min_norm(np.ones((2, 1)), [1.0, 3.0]).coef[0] == pytest.approx(2.0, abs=1e-14)


def test_min_norm_is_pseudoinverse(rng):
    A = rng.normal(size=(20, 6))
    A[:, 5] = A[:, 0] + A[:, 1]  # rank 5
    y = rng.normal(size=20)
    res = least_squares_min_norm(A, y)
    assert res.rank == 5 and res.rank_deficient
    np.testing.assert_allclose(res.coef, np.linalg.pinv(A) @ y, atol=1e-12)
    # any other minimizer differs by a null-space vector and is longer
    null = np.array([1, 1, 0, 0, 0, -1.0])
    assert np.linalg.norm(res.coef) < np.linalg.norm(res.coef + 0.1 * null)


def test_truncate_examples():
    assert truncate(-0.2, 0.05) == 0.05
    assert truncate(0.5, 0.05) == 0.5
    assert truncate(1.7, 0.1) == pytest.approx(0.9)


@settings(max_examples=100, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.001, 0.49))
def test_truncate_lipschitz_idempotent(u, v, eta0):
    assert abs(truncate(u, eta0) - truncate(v, eta0)) <= abs(u - v) + 1e-15
    assert truncate(truncate(u, eta0), eta0) == truncate(u, eta0)


def test_j_rule():
    assert j_rule(100, 3, 2.0, 1) == 4
    assert j_rule(2, 3, 2.0, 1) == 4
    assert j_rule(10**7, 3, 2.0, 1) == math.floor((1e7 / math.log(1e7)) ** 0.2)


def test_fit_constant_responses(rng):
    X = rng.random((60, 1))
    fit = fit_nuisances(Dataset(X, np.ones(60, int), rng.integers(0, 2, 60)), eta0=0.05)
    np.testing.assert_allclose(fit.predict(X).e, 0.95)
    # empty control arm falls back to 1/2
    np.testing.assert_allclose(fit.predict(X).q0, 0.5, atol=1e-14)


def test_fit_constant_outcome_mean_in_span(rng):
    # With outcome frequencies equal in every cell the least-squares fit is the constant.
    n = 400
    X = np.repeat(np.linspace(0.01, 0.99, 40), 10)[:, None]
    a = np.tile([1, 0], n // 2)
    y = np.tile([1, 1, 0, 0, 0], n // 5)  # each block of 10 has the same arms and 40% ones per arm
    fit = fit_nuisances(Dataset(X, a, y), eta0=0.05)
    v = fit.predict(rng.random((30, 1)))
    np.testing.assert_allclose(v.q1, 0.4, atol=1e-10)
    np.testing.assert_allclose(v.q0, 0.4, atol=1e-10)
    np.testing.assert_allclose(v.e, 0.5, atol=1e-10)


def test_fit_truncation_band(rng):
    X = rng.random((500, 2))
    e = 0.02 + 0.96 * X[:, 0]
    a = (rng.random(500) < e).astype(int)
    y = (rng.random(500) < X[:, 1]).astype(int)
    fit = SplineFitter(eta0=0.04)(Dataset(X, a, y))
    v = fit.predict(rng.random((1000, 2)))
    arr = v.as_array()
    assert arr.min() >= 0.04 and arr.max() <= 0.96


def test_fit_errors(rng):
    d = Dataset(rng.random((10, 1)), np.ones(10, int), np.ones(10, int))
    with pytest.raises(ValueError):
        fit_nuisances(d, eta0=0.5)
    with pytest.raises(ValueError):
        fit_nuisances(d, degree=2, beta_guess=2.0)


def test_json_roundtrip(rng):
    X = rng.random((200, 1))
    d = Dataset(X, rng.integers(0, 2, 200), rng.integers(0, 2, 200))
    fit = fit_nuisances(d)
    obj = json.loads(fit.to_json())
    assert set(obj) == {"degree", "J", "d", "knots", "coeffs_e", "coeffs_q1", "coeffs_q0", "eta0"}
    back = SplineFit.from_json(fit.to_json())
    np.testing.assert_array_equal(back.predict(X).as_array(), fit.predict(X).as_array())
