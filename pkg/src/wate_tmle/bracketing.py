"""Checks of the local bracketing conditions and the constants they involve."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .eif import EifContext, dstar_table
from .model import NuisanceValues, pmf_table
from .weights import WeightSpec, frak_c, lambda_bounds


@dataclass(frozen=True)
class Constants:
    t1: float
    t2: float
    delta_init: float
    tv_threshold: float
    mu0_threshold: float


def constants(c: float, c_init: float) -> Constants:
    """``t1 = c^6/8``, ``delta_init = t2 = c_init c^20 / 1e6`` and the TV / mu0 thresholds."""
    if not (0.0 < c <= 1.0 and 0.0 < c_init):
        raise ValueError("constants require 0 < c <= 1 and c_init > 0")
    delta = c_init * c**20 / 1e6
    return Constants(
        t1=c**6 / 8.0,
        t2=delta,
        delta_init=delta,
        tv_threshold=c**10 * c_init / 600.0,
        mu0_threshold=c_init * delta / 8.0,
    )


def check_positivity(u0: NuisanceValues, eta: float, tol: float = 1e-12) -> bool:
    """True when the ``2 eta`` ball around ``u0`` stays inside ``[eta, 1 - eta]``.

    ``tol`` absorbs rounding in ``3 * eta`` so that decimal boundary values
    such as ``0.3`` with ``eta = 0.1`` count as inside.
    """
    arr = u0.as_array()
    return bool(np.all(arr >= 3.0 * eta - tol) and np.all(arr <= 1.0 - 3.0 * eta + tol))


def c_init_hat(u0: NuisanceValues, w: WeightSpec) -> float:
    """Exact second moment of the restricted EIF under the model's own law."""
    ctx = EifContext.from_values(u0, w)
    return float(np.mean(np.einsum("iay,iay->i", dstar_table(ctx) ** 2, pmf_table(u0))))


def mu0_and_tv(u0: NuisanceValues, w: WeightSpec, true_law) -> tuple[float, float]:
    """Initial score bias under the true conditional law, and mean TV distance.

    ``true_law`` is either the true nuisance values at the same support points
    or an ``(m, 2, 2)`` table of true conditional probabilities.
    """
    p_star = pmf_table(true_law) if isinstance(true_law, NuisanceValues) else np.asarray(true_law, dtype=float)
    if p_star.shape != (u0.m, 2, 2):
        raise ValueError("true law must cover the same support points")
    ctx = EifContext.from_values(u0, w)
    mu0 = float(np.mean(np.einsum("iay,iay->i", dstar_table(ctx), p_star)))
    tv = float(np.mean(0.5 * np.abs(p_star - pmf_table(u0)).sum(axis=(1, 2))))
    return mu0, tv


@dataclass(frozen=True)
class BracketReport:
    eta_used: float
    c: float
    c_init_hat: float
    c_init: float
    t1: float
    t2: float
    delta_init: float
    tv_threshold: float
    mu0_threshold: float
    positivity_ok: bool
    square_bound_ok: bool
    mu0: float | None = None
    tv_gap: float | None = None
    mu0_ok: bool | None = None
    tv_ok: bool | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    def table(self) -> str:
        rows = []
        for k, v in self.to_dict().items():
            if v is None:
                shown = "unavailable (needs true law)"
            elif isinstance(v, bool):
                shown = "yes" if v else "no"
            else:
                shown = f"{v:.6g}"
            rows.append(f"{k:<16} {shown}")
        return "\n".join(rows)


def diagnose(
    u0: NuisanceValues,
    w: WeightSpec,
    eta: float,
    c_init: float | None = None,
    true_law=None,
) -> BracketReport:
    """Evaluate every checkable bracketing condition at ``(Q_n, u0)``.

    The interval constants and thresholds use the exact second moment
    ``c_init_hat`` as ``c_init``; the argument ``c_init`` is only the
    nondegeneracy threshold checked against it (default ``c**5``).  The TV and
    initial-bias checks need the true conditional law; without it they are
    reported as ``None``.
    """
    c = frak_c(lambda_bounds(w, eta))
    c_init = c**5 if c_init is None else c_init
    cih = c_init_hat(u0, w)
    k = constants(c, cih)
    mu0 = tv = mu0_ok = tv_ok = None
    if true_law is not None:
        mu0, tv = mu0_and_tv(u0, w, true_law)
        mu0_ok = abs(mu0) <= k.mu0_threshold
        tv_ok = tv <= k.tv_threshold
    return BracketReport(
        eta_used=eta,
        c=c,
        c_init_hat=cih,
        c_init=c_init,
        t1=k.t1,
        t2=k.t2,
        delta_init=k.delta_init,
        tv_threshold=k.tv_threshold,
        mu0_threshold=k.mu0_threshold,
        positivity_ok=check_positivity(u0, eta),
        square_bound_ok=cih >= c_init,
        mu0=mu0,
        tv_gap=tv,
        mu0_ok=mu0_ok,
        tv_ok=tv_ok,
    )
