"""Simulation designs with known nuisances, oracles and Monte Carlo replication."""
from __future__ import annotations

import csv
import json
import math
from functools import lru_cache
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import expit, logit
from scipy.stats import qmc

from .crossfit import EstimationError, cross_fit_estimate
from .eif import EifContext, d_full
from .model import Dataset, FunctionNuisance, NuisanceValues
from .splines import SplineFitter
from .targeting import TargetingConfig
from .weights import WeightSpec, lambda_eval


@dataclass(frozen=True)
class Logistic:
    """``lo + (hi - lo) * expit(intercept + slope * (s - 1/2) + curvature * (s - 1/2)^2)``
    with ``s`` the mean of the covariates."""

    lo: float
    hi: float
    intercept: float = 0.0
    slope: float = 0.0
    curvature: float = 0.0

    def __call__(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        s = X.mean(axis=1) - 0.5
        return self.lo + (self.hi - self.lo) * expit(self.intercept + self.slope * s + self.curvature * s * s)


@dataclass(frozen=True)
class DgpSpec:
    """A design: ``X ~ Uniform[0,1]^d``, ``A|X ~ Bern(e)``, ``Y|A,X ~ Bern(q_A)``."""

    name: str
    d: int
    q1: Logistic
    q0: Logistic
    e: Logistic

    @property
    def band(self) -> float:
        """Distance of all nuisance ranges from ``{0, 1}``; nuisances lie in ``[band, 1 - band]``."""
        return min(min(f.lo, 1.0 - f.hi) for f in (self.q1, self.q0, self.e))

    @property
    def eta_star(self) -> float:
        """Largest ``eta`` with every true nuisance in ``[2 eta, 1 - 2 eta]``."""
        return self.band / 2.0

    def nuisance(self) -> FunctionNuisance:
        return FunctionNuisance(self.q1, self.q0, self.e)

    def values(self, X) -> NuisanceValues:
        return NuisanceValues(self.q1(X), self.q0(X), self.e(X))


def catalog(d: int = 1) -> dict[str, DgpSpec]:
    """Named designs: ``null`` (no effect), ``smooth`` (heterogeneous), ``boundary`` (propensity in [0.1, 0.9])."""
    return {
        "null": DgpSpec(
            "null", d,
            q1=Logistic(0.2, 0.8, 0.0, 1.5),
            q0=Logistic(0.2, 0.8, 0.0, 1.5),
            e=Logistic(0.25, 0.75, 0.0, 2.0),
        ),
        "smooth": DgpSpec(
            "smooth", d,
            q1=Logistic(0.25, 0.85, 0.3, 2.0, -1.0),
            q0=Logistic(0.15, 0.7, -0.2, 1.0),
            e=Logistic(0.2, 0.8, 0.0, 2.5),
        ),
        "boundary": DgpSpec(
            "boundary", d,
            q1=Logistic(0.25, 0.85, 0.3, 2.0, -1.0),
            q0=Logistic(0.15, 0.7, -0.2, 1.0),
            e=Logistic(0.1, 0.9, 0.0, 4.0),
        ),
    }


def get_dgp(name: str, d: int = 1) -> DgpSpec:
    cat = catalog(d)
    if name not in cat:
        raise KeyError(f"unknown design {name!r}; choose from {sorted(cat)}")
    return cat[name]


def generate(dgp: DgpSpec, n: int, seed=None) -> Dataset:
    """Draw ``n`` i.i.d. observations; identical ``seed`` gives identical data."""
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    X = rng.random((n, dgp.d))
    e = dgp.e(X)
    a = (rng.random(n) < e).astype(np.int64)
    q = np.where(a == 1, dgp.q1(X), dgp.q0(X))
    y = (rng.random(n) < q).astype(np.int64)
    return Dataset(X, a, y)


@lru_cache(maxsize=8)
def _nodes(d: int, resolution: int):
    """Quadrature nodes and weights for the uniform law on ``[0, 1]^d``."""
    if d <= 2:
        g, wg = np.polynomial.legendre.leggauss(resolution)
        g = 0.5 * (g + 1.0)
        wg = 0.5 * wg
        if d == 1:
            return g[:, None], wg
        gx, gy = np.meshgrid(g, g, indexing="ij")
        return np.column_stack([gx.ravel(), gy.ravel()]), np.outer(wg, wg).ravel()
    pts = qmc.Sobol(d, scramble=True, seed=12345).random(resolution**2 if resolution < 4096 else resolution)
    return pts, np.full(pts.shape[0], 1.0 / pts.shape[0])


@lru_cache(maxsize=32)
def _population(dgp: DgpSpec, w: WeightSpec, resolution: int):
    X, wt = _nodes(dgp.d, resolution)
    v = dgp.values(X)
    lam = lambda_eval(w, v.e)
    omega = float(np.dot(wt, lam))
    psi = float(np.dot(wt, lam * v.tau) / omega)
    return X, wt, v, omega, psi


def true_psi(dgp: DgpSpec, w: WeightSpec, resolution: int = 2048, return_error: bool = False):
    """Population WATE by Gauss-Legendre quadrature (``d <= 2``) or scrambled Sobol points.

    With ``return_error`` also returns ``|psi(resolution) - psi(2 * resolution)|``.
    """
    val = _population(dgp, w, resolution)[4]
    if not return_error:
        return val
    return val, abs(val - _population(dgp, w, 2 * resolution)[4])


def oracle_context(dgp: DgpSpec, w: WeightSpec, X, resolution: int = 2048) -> EifContext:
    """EIF context at ``X`` with the population normalizer and target value."""
    _, _, _, omega, psi = _population(dgp, w, resolution)
    v = dgp.values(X)
    return EifContext(w, omega, psi, v.q1, v.q0, v.e)


def oracle_eif(dgp: DgpSpec, w: WeightSpec, data: Dataset, resolution: int = 2048) -> np.ndarray:
    """Full-model EIF at the true law, evaluated at each observation."""
    return d_full(data.a, data.y, oracle_context(dgp, w, data.X, resolution)).total


def oracle_eif_variance(dgp: DgpSpec, w: WeightSpec, resolution: int = 2048) -> float:
    """Population variance of the full EIF at the true law, by quadrature."""
    X, wt, v, omega, psi = _population(dgp, w, resolution)
    ctx = EifContext(w, omega, psi, v.q1, v.q0, v.e)
    total = np.zeros(X.shape[0])
    for a in (0, 1):
        pa = v.e if a == 1 else 1.0 - v.e
        qa = v.q1 if a == 1 else v.q0
        for y in (0, 1):
            p = pa * (qa if y == 1 else 1.0 - qa)
            total += p * d_full(a, y, ctx).total ** 2
    return float(np.dot(wt, total))


@dataclass
class ClassicalTmle:
    psi: float
    epsilon: float
    score: float


def classical_ate_tmle(fold: Dataset, u0: NuisanceValues, lo: float = -50.0, hi: float = 50.0) -> ClassicalTmle:
    """ATE by a single logistic fluctuation with clever covariate ``a/e - (1-a)/(1-e)``.

    The fluctuation parameter solves the score equation by bisection on ``[lo, hi]``.
    """
    a, y = fold.a, fold.y
    H = a / u0.e - (1 - a) / (1.0 - u0.e)
    off = logit(np.where(a == 1, u0.q1, u0.q0))

    def score(eps):
        return float(np.mean(H * (y - expit(off + eps * H))))

    s0 = score(0.0)
    if s0 == 0.0:
        eps = 0.0
    else:
        # a score that only vanishes by saturating at the clamp edge is not a root
        if not (score(lo) > 0.0 > score(hi)):
            raise ValueError("no root of the fluctuation score in the clamp range")
        for _ in range(300):
            mid = 0.5 * (lo + hi)
            s = score(mid)
            if abs(s) <= 1e-14:
                break
            if s > 0.0:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-15:
                break
        eps = mid
    q1 = expit(logit(u0.q1) + eps / u0.e)
    q0 = expit(logit(u0.q0) - eps / (1.0 - u0.e))
    return ClassicalTmle(float(np.mean(q1 - q0)), float(eps), score(eps))


@dataclass(frozen=True)
class StudyConfig:
    """Pipeline settings for one replication."""

    alpha: float = 0.05
    degree: int = 3
    eta0: float = 0.04
    beta_guess: float = 2.0
    nuisance: str = "spline"  # or "oracle": true nuisances as initial fit
    targeting: TargetingConfig = field(default_factory=TargetingConfig)


@dataclass
class McResult:
    rows: list
    summary: dict

    def write_csv(self, path) -> None:
        cols = list(self.rows[0].keys()) if self.rows else ["rep"]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            wr = csv.DictWriter(fh, fieldnames=cols)
            wr.writeheader()
            for r in self.rows:
                wr.writerow({k: (format(v, ".17g") if isinstance(v, float) else v) for k, v in r.items()})

    def write_json(self, path, dumps=None) -> None:
        dumps = dumps or (lambda obj: json.dumps(obj, indent=2, sort_keys=True))
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(dumps(self.summary) + "\n")


def summarize(rows: list, psi_true: float) -> dict:
    """Bias, sd, RMSE, coverage and mean CI length over successful replications."""
    ok = [r for r in rows if not r["failed"]]
    out = {"psi_true": psi_true, "reps": len(rows), "failures": len(rows) - len(ok)}
    if not ok:
        return out
    est = np.array([r["psi"] for r in ok])
    err = est - psi_true
    out.update(
        bias=float(err.mean()),
        sd=float(est.std(ddof=1)) if est.size > 1 else 0.0,
        rmse=float(np.sqrt(np.mean(err**2))),
        coverage=float(np.mean([r["covered"] for r in ok])),
        mean_ci_length=float(np.mean([r["ci_hi"] - r["ci_lo"] for r in ok])),
        mean_sigma2=float(np.mean([r["sigma2"] for r in ok])),
    )
    return out


def _one(job):
    dgp, w, n, cfg, rep, seed_seq, psi_true = job
    data_seed, fold_seed = seed_seq.generate_state(2)
    data = generate(dgp, n, int(data_seed))
    if cfg.nuisance == "oracle":
        truth = dgp.nuisance()

        def fitter(_):
            return truth
    else:
        fitter = SplineFitter(cfg.degree, cfg.eta0, cfg.beta_guess)
    row = {"rep": rep, "failed": False}
    try:
        est = cross_fit_estimate(data, w, fitter, cfg.targeting, cfg.alpha, seed=int(fold_seed))
    except (EstimationError, ValueError, RuntimeError) as exc:
        row.update(failed=True, error=str(exc), psi=float("nan"), sigma2=float("nan"), ci_lo=float("nan"),
                   ci_hi=float("nan"), covered=False, t_hat0=float("nan"), t_hat1=float("nan"),
                   oracle_var=float("nan"), fallback=True)
        return row
    orc = oracle_eif(dgp, w, data)
    row.update(
        error="",
        psi=est.psi_cf,
        sigma2=est.sigma2_cf,
        ci_lo=est.ci[0],
        ci_hi=est.ci[1],
        covered=bool(est.ci[0] <= psi_true <= est.ci[1]),
        t_hat0=est.fold_reports[0].t_hat,
        t_hat1=est.fold_reports[1].t_hat,
        oracle_var=float(np.var(orc, ddof=1)),
        fallback=bool(est.flags and any("fallback" in f for f in est.flags)),
    )
    return row


def run_replications(
    dgp: DgpSpec,
    w: WeightSpec,
    n: int,
    reps: int,
    cfg: StudyConfig | None = None,
    seed: int = 0,
    workers: int = 1,
) -> McResult:
    """Independent replications of the full cross-fitted pipeline.

    Every replication draws its seeds from ``SeedSequence(seed)``; results are
    merged in replication order, so output is identical for any ``workers``.
    """
    if reps < 1:
        raise ValueError("reps must be positive")
    cfg = cfg or StudyConfig()
    psi_true = true_psi(dgp, w)
    children = np.random.SeedSequence(seed).spawn(reps)
    jobs = [(dgp, w, n, cfg, r, children[r], psi_true) for r in range(reps)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(_one, jobs, chunksize=max(1, reps // (4 * workers))))
    else:
        rows = [_one(j) for j in jobs]
    summary = summarize(rows, psi_true)
    summary.update(design=dgp.name, d=dgp.d, n=n, weight=w.label, seed=seed, config=_cfg_dict(cfg))
    return McResult(rows, summary)


def _cfg_dict(cfg: StudyConfig) -> dict:
    d = asdict(cfg)
    return {k: (v if math.isfinite(v) else None) if isinstance(v, float) else v for k, v in d.items()}
