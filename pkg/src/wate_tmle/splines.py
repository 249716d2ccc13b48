"""Tensor-product B-spline least-squares nuisance estimators with truncation."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BSpline

from .model import Dataset, NuisanceValues

RCOND = 1e-10


@dataclass(frozen=True)
class SplineBasisSpec:
    """Degree-``r`` B-splines with ``J`` functions per axis on ``[0, 1]^d``.

    Interior knots are uniform; the boundary knots are repeated ``r + 1`` times.
    Basis functions are the normalized ones (they sum to one).
    """

    degree: int
    J: int
    d: int

    def __post_init__(self):
        if self.degree < 1:
            raise ValueError("spline degree must be >= 1")
        if self.J < self.degree + 1:
            raise ValueError("need J >= degree + 1")
        if self.d < 1:
            raise ValueError("dimension must be >= 1")

    @property
    def knots(self) -> np.ndarray:
        r = self.degree
        interior = np.linspace(0.0, 1.0, self.J - r + 1)[1:-1]
        return np.concatenate([np.zeros(r + 1), interior, np.ones(r + 1)])

    @property
    def K(self) -> int:
        return self.J**self.d


def _univariate(spec: SplineBasisSpec, u: np.ndarray) -> np.ndarray:
    return BSpline.design_matrix(u, spec.knots, spec.degree).toarray()


def design_matrix(spec: SplineBasisSpec, X) -> np.ndarray:
    """``(n, K)`` matrix of tensor-product basis values; axis 1 varies slowest."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != spec.d:
        raise ValueError(f"expected {spec.d} covariates, got {X.shape[1]}")
    if np.any((X < 0.0) | (X > 1.0)):
        raise ValueError("spline covariates must lie in [0, 1]")
    B = _univariate(spec, X[:, 0])
    for j in range(1, spec.d):
        Bj = _univariate(spec, X[:, j])
        B = (B[:, :, None] * Bj[:, None, :]).reshape(X.shape[0], -1)
    return B


def basis_eval(spec: SplineBasisSpec, x) -> np.ndarray:
    """Tensor-product basis vector at a single point ``x``."""
    return design_matrix(spec, np.asarray(x, dtype=float).reshape(1, -1))[0]


@dataclass(frozen=True)
class LeastSquaresResult:
    coef: np.ndarray
    rank: int

    @property
    def rank_deficient(self) -> bool:
        return self.rank < self.coef.shape[0]


def least_squares_min_norm(design, response) -> LeastSquaresResult:
    """Minimum-norm least-squares solution via SVD with relative cutoff ``RCOND``."""
    design = np.asarray(design, dtype=float)
    response = np.asarray(response, dtype=float)
    if design.shape[0] < 1:
        raise ValueError("need at least one row")
    if not np.any(design):
        return LeastSquaresResult(np.zeros(design.shape[1]), 0)
    coef, _, rank, _ = np.linalg.lstsq(design, response, rcond=RCOND)
    return LeastSquaresResult(coef, int(rank))


def truncate(u, eta0: float):
    """Clamp into ``[eta0, 1 - eta0]``."""
    out = np.clip(u, eta0, 1.0 - eta0)
    return float(out) if np.ndim(out) == 0 else out


def j_rule(m: int, degree: int, beta: float, d: int) -> int:
    """Per-axis basis size ``max(r + 1, floor((m / log(max(m, 3)))^(1 / (2 beta + d))))``."""
    rate = (m / math.log(max(m, 3))) ** (1.0 / (2.0 * beta + d))
    return max(degree + 1, int(math.floor(rate)))


@dataclass(frozen=True)
class SplineFit:
    """Truncated spline fits of ``(q1, q0, e)``; a :class:`~wate_tmle.model.NuisanceModel`."""

    basis: SplineBasisSpec
    coef_q1: np.ndarray
    coef_q0: np.ndarray
    coef_e: np.ndarray
    eta0: float
    rank_deficient: tuple = ()

    def raw(self, X) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        B = design_matrix(self.basis, X)
        return B @ self.coef_q1, B @ self.coef_q0, B @ self.coef_e

    def predict(self, X) -> NuisanceValues:
        q1, q0, e = self.raw(X)
        return NuisanceValues(truncate(q1, self.eta0), truncate(q0, self.eta0), truncate(e, self.eta0))

    def to_json(self) -> str:
        return json.dumps(
            {
                "degree": self.basis.degree,
                "J": self.basis.J,
                "d": self.basis.d,
                "knots": self.basis.knots.tolist(),
                "coeffs_e": self.coef_e.tolist(),
                "coeffs_q1": self.coef_q1.tolist(),
                "coeffs_q0": self.coef_q0.tolist(),
                "eta0": self.eta0,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> SplineFit:
        obj = json.loads(text)
        basis = SplineBasisSpec(obj["degree"], obj["J"], obj["d"])
        if not np.allclose(basis.knots, obj["knots"], rtol=0, atol=1e-15):
            raise ValueError("serialized knots do not match a uniform knot vector")
        return cls(
            basis,
            np.asarray(obj["coeffs_q1"]),
            np.asarray(obj["coeffs_q0"]),
            np.asarray(obj["coeffs_e"]),
            float(obj["eta0"]),
        )


def fit_nuisances(
    data: Dataset, degree: int = 3, eta0: float = 0.04, beta_guess: float = 2.0, J: int | None = None
) -> SplineFit:
    """Fit truncated spline estimators of the propensity and both outcome regressions.

    ``J`` defaults to :func:`j_rule` at ``m = data.n``.  An empty treatment arm
    gets the constant ``1/2`` (all coefficients ``1/2``, by partition of unity).
    """
    if not 0.0 < eta0 < 0.5:
        raise ValueError("truncation level must lie in (0, 1/2)")
    if degree <= max(beta_guess, 1.0):
        raise ValueError("spline degree must exceed max(beta_guess, 1)")
    if J is None:
        J = j_rule(data.n, degree, beta_guess, data.d)
    basis = SplineBasisSpec(degree, J, data.d)
    B = design_matrix(basis, data.X)
    fit_e = least_squares_min_norm(B, data.a)
    coefs = {}
    deficient = ["e"] if fit_e.rank_deficient else []
    for arm in (1, 0):
        rows = data.a == arm
        if not rows.any():
            coefs[arm] = np.full(basis.K, 0.5)
            continue
        res = least_squares_min_norm(B[rows], data.y[rows])
        coefs[arm] = res.coef
        if res.rank_deficient:
            deficient.append(f"q{arm}")
    return SplineFit(basis, coefs[1], coefs[0], fit_e.coef, eta0, tuple(deficient))


@dataclass(frozen=True)
class SplineFitter:
    """Picklable ``Dataset -> SplineFit`` callable with fixed tuning."""

    degree: int = 3
    eta0: float = 0.04
    beta_guess: float = 2.0

    def __call__(self, data: Dataset) -> SplineFit:
        return fit_nuisances(data, degree=self.degree, eta0=self.eta0, beta_guess=self.beta_guess)
