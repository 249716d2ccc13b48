"""Weight functions for weighted average treatment effects.

Each catalog entry is a smooth map ``lambda: (0, 1) -> [0, inf)`` applied to the
propensity score.  Derivatives up to order three are closed form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

__all__ = [
    "WeightSpec",
    "LambdaBounds",
    "lambda_eval",
    "lambda_bounds",
    "frak_c",
    "parse_weight",
    "KIND_CODES",
    "GRID_POINTS",
]

# Integer codes shared with the compiled kernels.
KIND_CODES = {
    "ATE": 0,
    "ATT": 1,
    "ATC": 2,
    "ATO": 3,
    "ATEN": 4,
    "ATB": 5,
    "SmoothTrim": 6,
}

GRID_POINTS = 10_000

_UNSUPPORTED = {
    "atm": "ATM weight min(t, 1-t) is not differentiable at 1/2",
    "attz": "trapezoidal ATTZ(K) weight has kinks",
    "trate": "indicator trimming weight is discontinuous; use smoothtrim:alpha,eps",
}


@dataclass(frozen=True)
class WeightSpec:
    """A weight function from the catalog.

    Parameters
    ----------
    kind : str
        One of ``ATE, ATT, ATC, ATO, ATEN, ATB, SmoothTrim``.
    nu1, nu2 : float
        Beta-weight exponents (``ATB`` only), ``lambda(t) = t**(nu1-1) (1-t)**(nu2-1)``.
    alpha, eps : float
        Smooth trimming level and Gaussian smoothing scale (``SmoothTrim`` only).
    """

    kind: str
    nu1: float = 1.0
    nu2: float = 1.0
    alpha: float = 0.1
    eps: float = 0.01

    def __post_init__(self):
        if self.kind not in KIND_CODES:
            raise ValueError(f"unknown weight kind {self.kind!r}")
        if self.kind == "ATB" and (self.nu1 < 1.0 or self.nu2 < 1.0):
            raise ValueError("ATB exponents must satisfy nu1, nu2 >= 1")
        if self.kind == "SmoothTrim":
            if not 0.0 < self.alpha < 0.5:
                raise ValueError("SmoothTrim alpha must lie in (0, 1/2)")
            if self.eps <= 0.0:
                raise ValueError("SmoothTrim eps must be positive")

    @property
    def code(self) -> tuple[int, float, float]:
        """``(kind, p1, p2)`` triple consumed by the compiled kernels."""
        k = KIND_CODES[self.kind]
        if self.kind == "ATB":
            return k, float(self.nu1), float(self.nu2)
        if self.kind == "SmoothTrim":
            return k, float(self.alpha), float(self.eps)
        return k, 0.0, 0.0

    @property
    def label(self) -> str:
        if self.kind == "ATB":
            return f"atb:{self.nu1!r},{self.nu2!r}"
        if self.kind == "SmoothTrim":
            return f"smoothtrim:{self.alpha!r},{self.eps!r}"
        return self.kind.lower()

    def __call__(self, t, order: int = 0):
        return lambda_eval(self, t, order)


@dataclass(frozen=True)
class LambdaBounds:
    lambda_min: float
    lambda_max: float
    d1_max: float
    d2_max: float
    d3_max: float
    eta: float

    def __post_init__(self):
        vals = (self.lambda_min, self.lambda_max, self.d1_max, self.d2_max, self.d3_max)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("weight bounds must be finite")
        if self.lambda_min > self.lambda_max:
            raise ValueError("lambda_min exceeds lambda_max")


def _falling(p: float, k: int) -> float:
    out = 1.0
    for j in range(k):
        out *= p - j
    return out


def _beta_deriv(t, a, b, order):
    # d^order/dt^order [t**a (1-t)**b] by Leibniz' rule.
    out = np.zeros_like(t)
    for k in range(order + 1):
        ca = _falling(a, k)
        cb = _falling(b, order - k) * (-1.0) ** (order - k)
        if ca == 0.0 or cb == 0.0:
            continue
        out = out + math.comb(order, k) * ca * cb * t ** (a - k) * (1.0 - t) ** (b - order + k)
    return out


def _gauss_cdf_deriv(z, eps, order):
    # d^order/du^order of Phi(u / eps) evaluated at u = z * eps.
    if order == 0:
        return ndtr(z)
    pdf = np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    if order == 1:
        return pdf / eps
    if order == 2:
        return -z * pdf / eps**2
    return (z * z - 1.0) * pdf / eps**3


def _smooth_trim(t, alpha, eps, order):
    u = (t - alpha) / eps
    v = (1.0 - alpha - t) / eps
    out = np.zeros_like(t)
    for k in range(order + 1):
        left = _gauss_cdf_deriv(u, eps, k)
        right = _gauss_cdf_deriv(v, eps, order - k) * (-1.0) ** (order - k)
        out = out + math.comb(order, k) * left * right
    return out


def lambda_eval(w: WeightSpec, t, order: int = 0):
    """Evaluate the ``order``-th derivative of the weight at ``t``.

    Accepts scalars or arrays; returns the same shape.  Raises ``ValueError``
    for ``order`` outside ``0..3`` or any ``t`` outside ``(0, 1)``.
    """
    if order not in (0, 1, 2, 3):
        raise ValueError(f"unsupported derivative order {order}")
    arr = np.asarray(t, dtype=float)
    if np.any(~((arr > 0.0) & (arr < 1.0))):
        raise ValueError("weight argument must lie strictly inside (0, 1)")
    out = _lambda_raw(w, np.atleast_1d(arr), order)
    return float(out[0]) if arr.ndim == 0 else out


def _lambda_raw(w: WeightSpec, x: np.ndarray, order: int) -> np.ndarray:
    kind = w.kind
    zero = np.zeros_like(x)
    if kind == "ATE":
        out = np.ones_like(x) if order == 0 else zero
    elif kind == "ATT":
        out = (x, np.ones_like(x), zero, zero)[order]
    elif kind == "ATC":
        out = (1.0 - x, -np.ones_like(x), zero, zero)[order]
    elif kind == "ATO":
        out = (x * (1.0 - x), 1.0 - 2.0 * x, np.full_like(x, -2.0), zero)[order]
    elif kind == "ATEN":
        if order == 0:
            out = -x * np.log(x) - (1.0 - x) * np.log1p(-x)
        elif order == 1:
            out = np.log1p(-x) - np.log(x)
        elif order == 2:
            out = -1.0 / x - 1.0 / (1.0 - x)
        else:
            out = 1.0 / x**2 - 1.0 / (1.0 - x) ** 2
    elif kind == "ATB":
        out = _beta_deriv(x, w.nu1 - 1.0, w.nu2 - 1.0, order)
    else:
        out = _smooth_trim(x, w.alpha, w.eps, order)
    return out


def _stationary_points(w: WeightSpec, order: int, eta: float) -> list[float]:
    """Interior critical points of the ``order``-th derivative, where known."""
    pts: list[float] = []
    if w.kind == "ATO" and order == 0:
        pts.append(0.5)
    elif w.kind == "ATEN" and order in (0, 2):
        pts.append(0.5)
    elif w.kind == "ATB" and order == 0:
        a, b = w.nu1 - 1.0, w.nu2 - 1.0
        if a + b > 0:
            pts.append(a / (a + b))
    elif w.kind == "SmoothTrim" and order == 0:
        pts.append(0.5)
    return [p for p in pts if eta <= p <= 1.0 - eta]


def lambda_bounds(w: WeightSpec, eta: float) -> LambdaBounds:
    """Extrema of the weight and its absolute derivatives over ``[eta, 1-eta]``.

    Polynomial weights (ATE, ATT, ATC, ATO) are handled exactly through
    endpoints and vertices.  Other weights add a uniform grid of
    ``GRID_POINTS`` nodes plus any closed-form stationary points.
    """
    if not 0.0 < eta < 0.25:
        raise ValueError("eta must lie in (0, 1/4)")
    polynomial = w.kind in ("ATE", "ATT", "ATC", "ATO")
    stats = []
    for order in range(4):
        pts = [eta, 1.0 - eta] + _stationary_points(w, order, eta)
        if not polynomial:
            pts.extend(np.linspace(eta, 1.0 - eta, GRID_POINTS).tolist())
        vals = np.asarray(lambda_eval(w, np.asarray(pts), order))
        if order == 0:
            stats.extend([float(vals.min()), float(vals.max())])
        else:
            stats.append(float(np.abs(vals).max()))
    # Clean signed zeros from exact polynomial evaluations.
    stats = [abs(s) if s == 0.0 else s for s in stats]
    return LambdaBounds(*stats, eta=eta)


def frak_c(b: LambdaBounds) -> float:
    """Largest constant bounded by both the weight floor and inverse derivative sizes."""
    if b.lambda_min <= 0.0:
        raise ValueError("weight vanishes on [eta, 1-eta]; regularity constant undefined")
    big = max(b.lambda_max, b.d1_max, b.d2_max, b.d3_max, b.eta)
    return min(b.lambda_min, b.eta, 1.0 / big)


def parse_weight(text: str) -> WeightSpec:
    """Parse ``name[:p1,p2]`` into a :class:`WeightSpec`.

    Grammar: lowercase name from ``ate, att, atc, ato, aten, atb, smoothtrim``;
    ``atb`` takes ``nu1,nu2`` and ``smoothtrim`` takes ``alpha,eps``.
    """
    name, _, rest = text.strip().partition(":")
    name = name.strip()
    for bad, why in _UNSUPPORTED.items():
        if name == bad:
            raise ValueError(f"weight {name!r} is not supported: {why}")
    simple = {"ate": "ATE", "att": "ATT", "atc": "ATC", "ato": "ATO", "aten": "ATEN"}
    params = [p for p in rest.split(",") if p.strip()] if rest else []
    try:
        nums = [float(p) for p in params]
    except ValueError:
        raise ValueError(f"non-numeric weight parameters in {text!r}") from None
    if name in simple:
        if nums:
            raise ValueError(f"weight {name!r} takes no parameters")
        return WeightSpec(simple[name])
    if name == "atb":
        if len(nums) != 2:
            raise ValueError("atb expects two parameters: atb:nu1,nu2")
        return WeightSpec("ATB", nu1=nums[0], nu2=nums[1])
    if name == "smoothtrim":
        if len(nums) != 2:
            raise ValueError("smoothtrim expects two parameters: smoothtrim:alpha,eps")
        return WeightSpec("SmoothTrim", alpha=nums[0], eps=nums[1])
    raise ValueError(f"unknown weight {name!r}")
