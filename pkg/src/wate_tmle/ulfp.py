"""The universal least favorable path on an empirical covariate marginal.

With the marginal fixed at ``m`` support points, the path is the system of
``3m`` coupled scalar ODEs ``d/dt (q1, q0, e)_i = F_i(U_t)``, where every
component depends on the whole state through ``Omega_t`` and ``psi_t``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson

from . import _kernels as K
from .model import Dataset, NuisanceValues
from .weights import WeightSpec


class PositivityBreach(RuntimeError):
    """The integrated state left ``(0, 1)``."""

    def __init__(self, t: float):
        super().__init__(f"path left the unit cube near t={t!r}")
        self.t = t


class NonContractionError(RuntimeError):
    """Successive Picard iterates moved apart."""


@dataclass(frozen=True)
class PathState:
    t: float
    values: NuisanceValues
    omega_t: float
    psi_t: float

    @classmethod
    def build(cls, t: float, values: NuisanceValues, w: WeightSpec) -> PathState:
        k, p1, p2 = w.code
        om, ps = K.omega_psi(values.q1, values.q0, values.e, k, p1, p2)
        if not om > 0.0:
            raise ValueError("weight normalizer vanished along the path")
        return cls(float(t), values, float(om), float(ps))


@dataclass(frozen=True)
class PathConfig:
    """Integration settings.

    ``h`` is the RK4 node spacing; ``fd_step`` the centered-difference step
    used for second derivatives of the path log-likelihood.
    """

    h: float = 1e-3
    method: str = "rk4"
    t_max: float = 50.0
    picard_iterations: int = 200
    picard_tol: float = 1e-14
    picard_nodes: int = 257
    fd_step: float = 1e-5

    def __post_init__(self):
        if not self.h > 0.0:
            raise ValueError("step must be positive")
        if self.method not in ("rk4", "picard"):
            raise ValueError(f"unknown integration method {self.method!r}")
        if not self.t_max > 0.0:
            raise ValueError("t_max must be positive")

    @classmethod
    def practical(cls, h: float = 1e-3, t_max: float = 50.0, **kw) -> PathConfig:
        return cls(h=h, t_max=t_max, fd_step=1e-5, **kw)

    @classmethod
    def theoretical(cls, c: float, **kw) -> PathConfig:
        """Step ``t1/512`` and ``t_max = 0.9 t1`` with ``t1 = c**6 / 8``."""
        t1 = c**6 / 8.0
        return cls(h=t1 / 512.0, t_max=0.9 * t1, fd_step=1e-5 * t1, **kw)


def vector_field(s: PathState | NuisanceValues, w: WeightSpec) -> np.ndarray:
    """``(3, m)`` array ``[F1, F0, Fe]`` of the path velocity at the state."""
    v = s.values if isinstance(s, PathState) else s
    k, p1, p2 = w.code
    om, _ = K.omega_psi(v.q1, v.q0, v.e, k, p1, p2)
    if not om > 0.0:
        raise ValueError("weight normalizer must be positive")
    return np.vstack(K.field(v.q1, v.q0, v.e, k, p1, p2))


def _inside(arrs) -> bool:
    for v in arrs:
        if not (np.all(v > 0.0) and np.all(v < 1.0)):
            return False
    return True


class Path:
    """Lazily integrated RK4 trajectory through ``u0``.

    Nodes at ``k*h`` (both directions) are computed once and cached; the state at
    any other ``t`` is one partial RK4 step of length ``< h`` from the nearest
    node toward zero.  This makes ``t -> U_t`` continuous, which bisection needs.
    """

    def __init__(self, u0: NuisanceValues, w: WeightSpec, h: float, t_max: float = math.inf):
        self.u0 = u0
        self.weight = w
        self.h = float(h)
        self.t_max = float(t_max)
        self._code = w.code
        base = (u0.q1, u0.q0, u0.e)
        self._nodes = {1: [base], -1: [base]}

    def _node(self, k: int, sign: int):
        nodes = self._nodes[sign]
        kind, p1, p2 = self._code
        while len(nodes) <= k:
            q1, q0, e = nodes[-1]
            nxt = K.rk4_step(q1, q0, e, sign * self.h, kind, p1, p2)
            if not _inside(nxt):
                raise PositivityBreach(sign * self.h * len(nodes))
            nodes.append(nxt)
        return nodes[k]

    def arrays(self, t: float):
        """``(q1, q0, e)`` arrays at time ``t``."""
        t = float(t)
        if abs(t) > self.t_max:
            raise ValueError(f"|t|={abs(t)!r} exceeds t_max={self.t_max!r}")
        sign = 1 if t >= 0 else -1
        k = int(abs(t) // self.h)
        rem = abs(t) - k * self.h
        q1, q0, e = self._node(k, sign)
        if rem <= 0.0:
            return q1, q0, e
        kind, p1, p2 = self._code
        out = K.rk4_step(q1, q0, e, sign * rem, kind, p1, p2)
        if not _inside(out):
            raise PositivityBreach(t)
        return out

    def state(self, t: float) -> PathState:
        return PathState.build(t, NuisanceValues(*self.arrays(t)), self.weight)

    @property
    def extent(self) -> tuple[float, float]:
        """Range of times covered by cached nodes."""
        return (-(len(self._nodes[-1]) - 1) * self.h, (len(self._nodes[1]) - 1) * self.h)


def integrate_path(u0: NuisanceValues, w: WeightSpec, t: float, cfg: PathConfig | None = None) -> PathState:
    """State of the path at time ``t`` (RK4 by default, Picard on request)."""
    cfg = cfg or PathConfig()
    if abs(t) >= cfg.t_max:
        raise ValueError(f"|t|={abs(t)!r} must be below t_max={cfg.t_max!r}")
    if t == 0.0:
        return PathState.build(0.0, u0, w)
    if cfg.method == "picard":
        res = picard_solve(u0, w, abs(t), cfg.picard_iterations, cfg.picard_tol, cfg.picard_nodes)
        arr = res.at_end(1 if t > 0 else -1)
        return PathState.build(t, NuisanceValues(*arr), w)
    return Path(u0, w, cfg.h, cfg.t_max).state(t)


@dataclass
class PicardResult:
    times: np.ndarray
    trajectory: np.ndarray  # (n_times, 3, m)
    distances: list = field(default_factory=list)
    converged: bool = False

    def at_end(self, sign: int):
        traj = self.trajectory[-1] if sign > 0 else self.trajectory[0]
        return traj[0], traj[1], traj[2]

    def contraction_ratios(self, floor: float = 1e-13) -> np.ndarray:
        """``d_{k+1} / d_k`` while both distances stay above ``floor``."""
        d = np.asarray(self.distances)
        ok = (d[:-1] > floor) & (d[1:] > floor)
        return d[1:][ok] / d[:-1][ok]


def picard_solve(
    u0: NuisanceValues,
    w: WeightSpec,
    T: float,
    iterations: int = 200,
    tol: float = 1e-14,
    nodes: int = 257,
    field_fn=None,
) -> PicardResult:
    """Fixed-point iteration of ``U -> U0 + int_0^t F(U(s)) ds`` on ``[-T, T]``.

    Each half-interval carries ``nodes`` equispaced points and the integral is
    cumulative Simpson.  Iteration stops once the sup-distance between
    successive iterates is at most ``tol``.  ``field_fn(q1, q0, e) -> (3, m)``
    overrides the velocity (used to test degenerate fields).
    """
    if not T > 0.0:
        raise ValueError("T must be positive")
    kind, p1, p2 = w.code
    if field_fn is None:
        def field_fn(q1, q0, e):
            return np.vstack(K.field(q1, q0, e, kind, p1, p2))

    half = np.linspace(0.0, T, nodes)
    times = np.concatenate([-half[:0:-1], half])
    mid = nodes - 1
    base = u0.as_array().T  # (3, m)
    traj = np.broadcast_to(base, (times.size,) + base.shape).copy()
    res = PicardResult(times, traj)
    for _ in range(iterations):
        vel = np.stack([field_fn(*traj[j]) for j in range(times.size)])
        new = np.empty_like(traj)
        fwd = cumulative_simpson(vel[mid:], x=half, axis=0, initial=0.0)
        # int_0^{-s} F = -int_0^{s} F(U(-u)) du
        bwd = -cumulative_simpson(vel[mid::-1], x=half, axis=0, initial=0.0)
        new[mid:] = base + fwd
        new[: mid + 1] = (base + bwd)[::-1]
        if not _inside(new):
            raise PositivityBreach(float(T))
        dist = float(np.max(np.abs(new - traj)))
        prev = res.distances[-1] if res.distances else math.inf
        res.distances.append(dist)
        traj = new
        if dist <= tol:
            res.converged = True
            break
        if dist > prev and dist > max(1e3 * tol, 1e-12):
            raise NonContractionError(f"Picard distance grew from {prev:.3e} to {dist:.3e}")
    res.trajectory = traj
    return res


def loglik_path(
    fold: Dataset,
    u0: NuisanceValues,
    w: WeightSpec,
    t: float,
    cfg: PathConfig | None = None,
    path: Path | None = None,
) -> tuple[float, float, float]:
    """``(L(t), L'(t), L''(t))`` of the fold's conditional log-likelihood along the path.

    ``L'`` is the fold mean of the restricted EIF at ``U_t``; ``L''`` is a
    centered difference of ``L'`` with step ``cfg.fd_step``.
    """
    cfg = cfg or PathConfig()
    if u0.m != fold.n:
        raise ValueError("path support must coincide with the fold covariates")
    path = path or Path(u0, w, cfg.h, cfg.t_max)
    kind, p1, p2 = w.code
    a, y = fold.a, fold.y

    def score(s):
        q1, q0, e = path.arrays(s)
        return K.loglik_score(q1, q0, e, a, y, kind, p1, p2)

    L, dL = score(t)
    if not math.isfinite(L):
        raise PositivityBreach(t)
    d = cfg.fd_step
    d2L = (score(t + d)[1] - score(t - d)[1]) / (2.0 * d)
    return float(L), float(dL), float(d2L)


def write_trajectory_csv(file, path: Path, times) -> None:
    """Dump ``(t, i, q1, q0, e, omega_t, psi_t)`` rows for plotting."""
    with open(file, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", "i", "q1", "q0", "e", "omega_t", "psi_t"])
        for t in times:
            s = path.state(t)
            for i in range(s.values.m):
                wr.writerow([repr(float(t)), i, repr(float(s.values.q1[i])), repr(float(s.values.q0[i])),
                             repr(float(s.values.e[i])), repr(s.omega_t), repr(s.psi_t)])
