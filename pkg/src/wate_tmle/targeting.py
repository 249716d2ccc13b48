"""Solve the fold-level EIF equation along the path and produce the targeted fit."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .bracketing import c_init_hat
from .model import Dataset, NuisanceValues
from .ulfp import Path, PathConfig, PositivityBreach
from .weights import WeightSpec, frak_c, lambda_bounds

MODES = ("practical", "theoretical")


class NoRootError(RuntimeError):
    """No sign change of the path score inside the admissible window."""

    def __init__(self, msg: str, report: RootReport):
        super().__init__(msg)
        self.report = report


@dataclass
class RootReport:
    t_hat: float
    bracket: tuple
    residual: float
    mode: str
    monotone_ok: bool
    iterations: int
    converged: bool = True
    score_at_zero: float = 0.0
    flags: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "t_hat": self.t_hat,
            "bracket": [self.bracket[0], self.bracket[1]],
            "residual": self.residual,
            "mode": self.mode,
            "monotone_ok": self.monotone_ok,
            "iterations": self.iterations,
            "converged": self.converged,
            "score_at_zero": self.score_at_zero,
            "flags": list(self.flags),
        }


@dataclass(frozen=True)
class TargetingConfig:
    """Root-finding settings.

    ``practical`` (default) starts from ``[t-, t+] = 4 L'(0)/c_init`` with
    ``c_init`` the model-implied score variance and doubles outward up to
    ``t_max``.  ``theoretical`` restricts to ``[-t2, t2]`` with
    ``t2 = c_init c**20 / 1e6``; ``eta`` fixes ``c`` (default: the widest
    band compatible with the initial values) and ``c_init`` defaults to
    ``c**5``.
    """

    mode: str = "practical"
    h: float | None = None
    t_max: float | None = None
    eta: float | None = None
    c_init: float | None = None
    score_tol: float = 1e-11
    width_tol: float = 1e-14
    max_bisections: int = 200
    fallback: str = "zero"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.fallback not in ("plugin", "zero"):
            raise ValueError("fallback must be 'plugin' or 'zero'")


def score_bracket(c_init: float, L0: float) -> tuple[float, float]:
    """``(t-, t+) = (-4 [-L0]_+ / c_init, 4 [L0]_+ / c_init)``."""
    if not c_init > 0.0:
        raise ValueError("c_init must be positive")
    return -4.0 * max(-L0, 0.0) / c_init, 4.0 * max(L0, 0.0) / c_init


def theoretical_bracket(c: float, c_init: float, L0: float) -> tuple[float, float]:
    """``[t-, t+]`` intersected with ``[-t2, t2]``, widened to contain zero."""
    if not (0.0 < c and 0.0 < c_init):
        raise ValueError("constants must be positive")
    t2 = c_init * c**20 / 1e6
    t_minus, t_plus = score_bracket(c_init, L0)
    lo = min(max(t_minus, -t2), 0.0)
    hi = max(min(t_plus, t2), 0.0)
    return lo, hi


def band_eta(u0: NuisanceValues) -> float:
    """Largest ``eta < 1/4`` such that every value lies in ``[3 eta, 1 - 3 eta]``."""
    arr = u0.as_array()
    return min(float(np.minimum(arr, 1.0 - arr).min()) / 3.0, 0.2499999)


def _path_config(cfg: TargetingConfig, c: float | None) -> PathConfig:
    if cfg.mode == "theoretical":
        base = PathConfig.theoretical(c)
        return PathConfig(h=cfg.h or base.h, t_max=cfg.t_max or base.t_max, fd_step=base.fd_step)
    return PathConfig.practical(h=cfg.h or 1e-3, t_max=cfg.t_max or 50.0)


class _Score:
    def __init__(self, fold: Dataset, path: Path, w: WeightSpec):
        self.path = path
        self.a = fold.a
        self.y = fold.y
        self.code = w.code
        self.evals: dict[float, float] = {}

    def __call__(self, t: float) -> float:
        if t in self.evals:
            return self.evals[t]
        q1, q0, e = self.path.arrays(t)
        kind, p1, p2 = self.code
        _, sc = K.loglik_score(q1, q0, e, self.a, self.y, kind, p1, p2)
        self.evals[t] = float(sc)
        return float(sc)

    def monotone(self) -> bool:
        ts = sorted(self.evals)
        vals = [self.evals[t] for t in ts]
        return all(b < a for a, b in zip(vals, vals[1:]))


def _solve(fold: Dataset, u0: NuisanceValues, w: WeightSpec, cfg: TargetingConfig):
    if u0.m != fold.n:
        raise ValueError("initial values must be evaluated at the fold covariates")
    c = None
    if cfg.mode == "theoretical":
        eta = cfg.eta if cfg.eta is not None else band_eta(u0)
        c = frak_c(lambda_bounds(w, eta))
    pcfg = _path_config(cfg, c)
    path = Path(u0, w, pcfg.h, pcfg.t_max)
    L = _Score(fold, path, w)
    L0 = L(0.0)
    flags: list[str] = []

    def report(t_hat, lo, hi, its, converged=True):
        return RootReport(
            t_hat=float(t_hat),
            bracket=(float(lo), float(hi)),
            residual=abs(L(t_hat)) if converged else abs(L0),
            mode=cfg.mode,
            monotone_ok=L.monotone(),
            iterations=its,
            converged=converged,
            score_at_zero=L0,
            flags=flags,
        )

    if abs(L0) <= cfg.score_tol:
        return report(0.0, 0.0, 0.0, 0), path

    sign = 1.0 if L0 > 0 else -1.0
    if cfg.mode == "theoretical":
        c_init = cfg.c_init if cfg.c_init is not None else c**5
        lo, hi = theoretical_bracket(c, c_init, L0)
        far = hi if sign > 0 else lo
        try:
            ok = far != 0.0 and sign * L(far) <= 0.0
        except PositivityBreach:
            ok = False
            flags.append("positivity_breach")
        if not ok:
            flags.append("no_sign_change")
            raise NoRootError("score keeps its sign on the theoretical bracket", report(0.0, lo, hi, 0, False))
    else:
        c_init = cfg.c_init if cfg.c_init is not None else c_init_hat(u0, w)
        limit = 0.999 * pcfg.t_max
        t_minus, t_plus = score_bracket(c_init, L0)
        near, far = 0.0, min(t_plus - t_minus, limit)
        try:
            while sign * L(sign * far) > 0.0:
                if far >= limit:
                    flags.append("no_sign_change")
                    raise NoRootError(
                        "score keeps its sign up to t_max",
                        report(0.0, min(0.0, sign * far), max(0.0, sign * far), 0, False),
                    )
                near, far = far, min(2.0 * far, limit)
        except PositivityBreach as exc:
            flags.append("positivity_breach")
            raise NoRootError(str(exc), report(0.0, min(0.0, sign * far), max(0.0, sign * far), 0, False)) from exc
        lo, hi = sorted((sign * near, sign * far))

    # L' is decreasing along the path: L(lo) >= 0 >= L(hi).
    its = 0
    t_hat = None
    while its < cfg.max_bisections:
        its += 1
        mid = 0.5 * (lo + hi)
        v = L(mid)
        if abs(v) <= cfg.score_tol:
            t_hat = mid
            break
        if v > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= cfg.width_tol:
            break
    if t_hat is None:
        t_hat = lo if abs(L(lo)) <= abs(L(hi)) else hi
    rep = report(t_hat, lo, hi, its)
    if rep.residual > cfg.score_tol:
        flags.append("width_limited")
    if not rep.monotone_ok:
        flags.append("non_monotone_score")
    return rep, path


def solve_root(
    fold: Dataset, u0: NuisanceValues, w: WeightSpec, cfg: TargetingConfig | None = None
) -> RootReport:
    """Find ``t`` with zero fold-mean EIF along the path from ``u0``.

    Raises :class:`NoRootError` (carrying a report) when no sign change is found.
    """
    return _solve(fold, u0, w, cfg or TargetingConfig())[0]


@dataclass
class FoldFit:
    values: NuisanceValues
    psi: float
    omega: float
    d_full: np.ndarray
    report: RootReport
    fallback: bool = False

    @property
    def full_eif_mean(self) -> float:
        return float(np.mean(self.d_full))


def targeted_fold_fit(
    fold: Dataset, u0: NuisanceValues, w: WeightSpec, cfg: TargetingConfig | None = None
) -> FoldFit:
    """Targeted nuisance values, fold estimate and per-sample full-EIF values.

    When no root exists the fold falls back to ``t = 0``: with the default
    ``cfg.fallback == "zero"`` both the estimate and the EIF values are set to
    zero; with ``"plugin"`` the estimate is the plug-in at ``u0``.
    """
    cfg = cfg or TargetingConfig()
    kind, p1, p2 = w.code
    try:
        rep, path = _solve(fold, u0, w, cfg)
        values = NuisanceValues(*path.arrays(rep.t_hat))
        fallback = False
    except NoRootError as exc:
        rep = exc.report
        rep.t_hat = 0.0
        rep.flags.append("fallback_t0")
        values = u0
        fallback = True
    om, ps = K.omega_psi(values.q1, values.q0, values.e, kind, p1, p2)
    d = K.eif_obs(values.q1, values.q0, values.e, fold.a, fold.y, kind, p1, p2, True)
    if fallback and cfg.fallback == "zero":
        ps = 0.0
        d = np.zeros(fold.n)
    if not math.isfinite(ps):
        raise RuntimeError("non-finite fold estimate")
    return FoldFit(values, float(ps), float(om), np.asarray(d), rep, fallback)
