from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracle import wate
from wate_tmle.model import (
    Dataset, FunctionNuisance, InputError, NuisanceValues, conditional_pmf, omega, pmf_table, psi, read_csv,
    write_csv,
)
from wate_tmle.weights import WeightSpec

ATO = WeightSpec("ATO")
unit = st.floats(0.001, 0.999)


def test_conditional_pmf_examples():
    v = NuisanceValues([0.8], [0.4], [0.5])
    assert conditional_pmf(v, 0, 1, 1) == pytest.approx(0.4, abs=1e-16)
    assert conditional_pmf(v, 0, 0, 0) == pytest.approx(0.3, abs=1e-16)
    tab = pmf_table(v)
    for a in (0, 1):
        for y in (0, 1):
            assert tab[0, a, y] == conditional_pmf(v, 0, a, y)


@settings(max_examples=50, deadline=None)
@given(arrays(float, 7, elements=unit), arrays(float, 7, elements=unit), arrays(float, 7, elements=unit))
def test_pmf_rows_sum_to_one(q1, q0, e):
    tab = pmf_table(NuisanceValues(q1, q0, e))
    np.testing.assert_allclose(tab.sum(axis=(1, 2)), 1.0, atol=1e-15)
    assert np.all(tab > 0)


def test_omega_examples():
    v = NuisanceValues([0.3, 0.6], [0.2, 0.2], [0.3, 0.7])
    assert omega(v, WeightSpec("ATE")) == 1.0
    assert omega(v, WeightSpec("ATT")) == pytest.approx(0.5, abs=1e-16)
    assert omega(NuisanceValues([0.5, 0.5], [0.5, 0.5], [0.5, 0.25]), ATO) == pytest.approx(0.21875, abs=1e-16)


def test_psi_examples(two_point):
    exact, _ = wate([(Fraction(4, 5), Fraction(2, 5), Fraction(1, 2)), (Fraction(3, 5), Fraction(3, 10), Fraction(1, 4))], "ATO")
    assert exact == Fraction(5, 14)
    assert psi(two_point, ATO) == pytest.approx(5 / 14, abs=1e-15)
    # blips (1, 0) under the unweighted mean; the boundary values are approached from inside
    tiny = 1e-13
    v = NuisanceValues([1 - tiny, tiny], [tiny, tiny], [0.2, 0.9])
    assert psi(v, WeightSpec("ATE")) == pytest.approx(0.5, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(arrays(float, 5, elements=unit), arrays(float, 5, elements=unit), arrays(float, 5, elements=unit))
def test_constant_blip_and_bounds(q1, q0, e):
    for w in (ATO, WeightSpec("ATT"), WeightSpec("ATEN")):
        assert psi(NuisanceValues(np.full(5, 0.7), np.full(5, 0.3), e), w) == pytest.approx(0.4, abs=1e-14)
        v = NuisanceValues(q1, q0, e)
        assert abs(psi(v, w)) <= np.max(np.abs(v.tau)) + 1e-15 <= 1.0 + 1e-15


def test_psi_scale_invariance(rng):
    v = NuisanceValues(*(rng.uniform(0.1, 0.9, 40) for _ in range(3)))
    # ATB(2,2) is ATO; scaling lam by a constant is the same as the ratio identity
    lam = v.e * (1 - v.e)
    ref = np.dot(3.7 * lam, v.tau) / np.sum(3.7 * lam)
    assert psi(v, ATO) == pytest.approx(ref, abs=1e-12)


def test_omega_floor():
    v = NuisanceValues([0.5], [0.5], [1e-300])
    with pytest.raises(ValueError, match="normalizer"):
        omega(v, WeightSpec("ATT"))


def test_nuisance_validation():
    with pytest.raises(ValueError):
        NuisanceValues([0.5, 1.0], [0.5, 0.5], [0.5, 0.5])
    with pytest.raises(ValueError):
        NuisanceValues([0.5], [0.5, 0.5], [0.5, 0.5])
    v = NuisanceValues.from_array([[0.1, 0.2, 0.3], [0.4, 0.5, 0.6]])
    np.testing.assert_array_equal(v.as_array(), [[0.1, 0.2, 0.3], [0.4, 0.5, 0.6]])
    with pytest.raises(ValueError):
        v.q1[0] = 0.3


def test_function_nuisance():
    f = FunctionNuisance(lambda X: 0.2 + 0.5 * X[:, 0], lambda X: np.full(len(X), 0.3), lambda X: 0.5 + 0 * X[:, 0])
    v = f.predict([[0.0], [1.0]])
    np.testing.assert_allclose(v.q1, [0.2, 0.7])


def test_dataset_validation():
    X = np.array([[0.1], [0.9]])
    with pytest.raises(InputError):
        Dataset(X, [0, 2], [0, 1])
    with pytest.raises(InputError):
        Dataset(X + 1, [0, 1], [0, 1])
    with pytest.raises(InputError):
        Dataset(np.empty((0, 1)), [], [])
    d = Dataset(X, [0, 1], [1, 1])
    assert d.n == 2 and d.d == 1
    s = list(d.samples())
    assert s[1].a == 1 and s[1].x[0] == 0.9
    assert d.subset([1]).n == 1


def test_csv_roundtrip(tmp_path, rng):
    X = rng.random((30, 2))
    d = Dataset(X, rng.integers(0, 2, 30), rng.integers(0, 2, 30))
    write_csv(tmp_path / "d.csv", d)
    back = read_csv(tmp_path / "d.csv")
    np.testing.assert_array_equal(back.X, d.X)
    np.testing.assert_array_equal(back.a, d.a)


@pytest.mark.parametrize(
    "body, msg",
    [
        ("x1,a,y\n0.5,2,1\n", "row 2: a=2 is not binary"),
        ("x1,a,y\n0.5,1,1\n0.2,0,0.5\n", "row 3: y=0.5 is not binary"),
        ("x1,x2,a,y\n0.5,1,1\n", "row 2: expected 4 fields"),
        ("x2,a,y\n0.5,1,1\n", "header"),
        ("x1,a,y\n1.5,1,1\n", "row 2: covariate outside"),
        ("x1,a,y\nfoo,1,1\n", "non-numeric"),
        ("", "empty"),
    ],
)
def test_csv_errors(tmp_path, body, msg):
    p = tmp_path / "bad.csv"
    p.write_text(body)
    with pytest.raises(InputError, match=msg):
        read_csv(p)


def test_csv_rescale(tmp_path):
    p = tmp_path / "r.csv"
    p.write_text("x1,a,y\n2,1,1\n4,0,1\n3,1,0\n")
    d = read_csv(p, rescale=True)
    np.testing.assert_allclose(d.X[:, 0], [0, 1, 0.5])
    assert d.metadata["rescaled"] and d.metadata["x_min"] == [2.0]
