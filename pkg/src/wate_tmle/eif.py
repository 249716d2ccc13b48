"""Influence functions of the WATE under the full and fixed-marginal models.

All functions broadcast over numpy arrays: ``a``, ``y`` and the nuisance
values may be scalars or aligned vectors.  Nothing is clipped here; callers
must supply propensities strictly inside ``(0, 1)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .model import NuisanceValues, omega, psi, pmf_table
from .weights import WeightSpec, lambda_eval


@dataclass(frozen=True)
class EifContext:
    """Weight, normalizer, target value and nuisance values at the support points."""

    weight: WeightSpec
    omega: float
    psi: float
    q1: np.ndarray
    q0: np.ndarray
    e: np.ndarray

    def __post_init__(self):
        if not self.omega > 0.0:
            raise ValueError("omega must be positive")
        for v in (self.q1, self.q0, self.e):
            if not np.all((np.asarray(v) > 0.0) & (np.asarray(v) < 1.0)):
                raise ValueError("nuisance values must lie strictly inside (0, 1)")

    @classmethod
    def from_values(cls, v: NuisanceValues, w: WeightSpec) -> EifContext:
        """Context whose ``omega`` and ``psi`` are taken under the empirical marginal of ``v``."""
        return cls(w, omega(v, w), psi(v, w), v.q1, v.q0, v.e)

    def at(self, idx) -> EifContext:
        """Same weight and scalars, nuisance values restricted to ``idx``."""
        return EifContext(self.weight, self.omega, self.psi, self.q1[idx], self.q0[idx], self.e[idx])


class FullEif(NamedTuple):
    total: np.ndarray
    d_q: np.ndarray
    d_e: np.ndarray
    d_x: np.ndarray


def aipw_phi(a, y, q1, q0, e):
    """Augmented IPW pseudo-outcome whose conditional mean is the blip."""
    e = np.asarray(e, dtype=float)
    if np.any((e <= 0.0) | (e >= 1.0)):
        raise ValueError("propensity must lie strictly inside (0, 1)")
    return a / e * (y - q1) - (1 - a) / (1.0 - e) * (y - q0) + (q1 - q0)


def _parts(a, y, ctx: EifContext):
    lam = lambda_eval(ctx.weight, ctx.e)
    dlam = lambda_eval(ctx.weight, ctx.e, 1)
    tau = ctx.q1 - ctx.q0
    phi = aipw_phi(a, y, ctx.q1, ctx.q0, ctx.e)
    d_q = lam / ctx.omega * (phi - tau)
    d_e = dlam / ctx.omega * (tau - ctx.psi) * (a - ctx.e)
    d_x = lam / ctx.omega * (tau - ctx.psi)
    return d_q, d_e, d_x


def d_restricted(a, y, ctx: EifContext):
    """Fixed-marginal EIF: outcome and propensity components only."""
    d_q, d_e, _ = _parts(a, y, ctx)
    return d_q + d_e


def d_full(a, y, ctx: EifContext) -> FullEif:
    """Full-model EIF and its three components ``(d_q, d_e, d_x)``."""
    d_q, d_e, d_x = _parts(a, y, ctx)
    return FullEif(d_q + d_e + d_x, d_q, d_e, d_x)


def d_full_direct(a, y, ctx: EifContext):
    """Single-expression form ``lam/Omega (phi - psi) + dlam/Omega (tau - psi)(a - e)``."""
    lam = lambda_eval(ctx.weight, ctx.e)
    dlam = lambda_eval(ctx.weight, ctx.e, 1)
    phi = aipw_phi(a, y, ctx.q1, ctx.q0, ctx.e)
    return lam / ctx.omega * (phi - ctx.psi) + dlam / ctx.omega * (ctx.q1 - ctx.q0 - ctx.psi) * (a - ctx.e)


def dstar_table(ctx: EifContext) -> np.ndarray:
    """``(m, 2, 2)`` restricted-EIF values at every support point and ``(a, y)``."""
    out = np.empty((ctx.e.shape[0], 2, 2))
    for a in (0, 1):
        for y in (0, 1):
            out[:, a, y] = d_restricted(a, y, ctx)
    return out


def conditional_mean_dstar(i: int, ctx: EifContext, pmf) -> float:
    """``sum_{a,y} D*(x_i, a, y) pmf[a, y]`` for a 2x2 conditional law ``pmf``."""
    pmf = np.asarray(pmf, dtype=float).reshape(2, 2)
    if np.any(pmf < 0.0) or abs(pmf.sum() - 1.0) > 1e-12:
        raise ValueError("pmf must be a probability table on {0,1}^2")
    sub = ctx.at(slice(i, i + 1))
    return float(sum(d_restricted(a, y, sub)[0] * pmf[a, y] for a in (0, 1) for y in (0, 1)))


def conditional_means(ctx: EifContext, pmf_tab: np.ndarray | None = None) -> np.ndarray:
    """Per-point conditional mean of ``D*`` under ``pmf_tab`` (default: the model's own law)."""
    if pmf_tab is None:
        pmf_tab = pmf_table(NuisanceValues(ctx.q1, ctx.q0, ctx.e))
    return np.einsum("iay,iay->i", dstar_table(ctx), pmf_tab)
