"""Command-line front end: ``wate-tmle {fit,simulate,coverage,diagnose,weights}``."""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .bracketing import diagnose
from .crossfit import EstimationError, cross_fit_estimate, split_folds
from .model import InputError, read_csv
from .simlab import StudyConfig, generate, get_dgp, run_replications
from .splines import SplineFitter
from .targeting import TargetingConfig
from .weights import KIND_CODES, frak_c, lambda_bounds, parse_weight

EXIT_OK, EXIT_INPUT, EXIT_ESTIMATION = 0, 1, 2


def _fmt(x) -> str:
    if isinstance(x, bool) or x is None:
        return json.dumps(x)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            return "null"
        s = format(x, ".17g")
        return s if any(c in s for c in ".en") else s + ".0"
    if isinstance(x, str):
        return json.dumps(x, ensure_ascii=False)
    raise TypeError(f"cannot serialize {type(x).__name__}")


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON with every float written to 17 significant digits and non-finite values as null."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in sorted(obj.items())]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        return "[" + ", ".join(dumps(v, indent, _level + 1) for v in obj) + "]"
    return _fmt(obj)


def config_digest(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _emit(payload: dict, out: str | None) -> None:
    text = dumps(payload) + "\n"
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _run_config(args, **extra) -> dict:
    cfg = {
        "weight": args.weight,
        "alpha": args.alpha,
        "degree": args.degree,
        "trunc": args.trunc,
        "beta": args.beta,
        "mode": args.mode,
        "seed": args.seed,
    }
    cfg.update(extra)
    return cfg


def _provenance(cfg: dict) -> dict:
    return {"version": __version__, "config_digest": config_digest(cfg), "seed": cfg["seed"], "config": cfg}


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--weight", default="ate", help="weight name with optional parameters, e.g. atb:2.5,3.0")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--degree", type=int, default=3, help="spline degree r")
    p.add_argument("--trunc", type=float, default=0.04, help="nuisance truncation level")
    p.add_argument("--beta", type=float, default=2.0, help="smoothness guess for the basis-size rule")
    p.add_argument("--mode", choices=("practical", "theoretical"), default="practical")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--out", default=None, help="output path (JSON) or prefix (studies)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wate-tmle", description="One-step TMLE of weighted average treatment effects.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="estimate from a CSV file")
    p.add_argument("csv")
    _common(p)
    p.add_argument("--eif-out", default=None, help="write per-observation EIF values to this CSV")
    p.add_argument("--rescale", action="store_true", help="min-max rescale covariates into [0, 1]")

    for name, hlp in (("simulate", "Monte Carlo study on a catalog design"),
                      ("coverage", "coverage and RMSE trend across sample sizes")):
        p = sub.add_parser(name, help=hlp)
        _common(p)
        p.add_argument("--dgp", default="smooth", help="null, smooth or boundary")
        p.add_argument("--d", type=int, default=1)
        p.add_argument("--n", type=int, nargs="+", default=[500] if name == "simulate" else [500, 2000])
        p.add_argument("--reps", type=int, default=100)
        p.add_argument("--nuisance", choices=("spline", "oracle"), default="spline")

    p = sub.add_parser("diagnose", help="bracketing diagnostics on a CSV file or a simulated design")
    p.add_argument("csv", nargs="?", default=None)
    _common(p)
    p.add_argument("--dgp", default=None)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--eta", type=float, default=None, help="positivity band (default: trunc / 4)")
    p.add_argument("--c-init", type=float, default=None)
    p.add_argument("--rescale", action="store_true")

    p = sub.add_parser("weights", help="list the weight catalog with bounds and regularity constants")
    p.add_argument("--eta", type=float, default=0.05)
    p.add_argument("--weight", default=None)
    return ap


def _targeting(args) -> TargetingConfig:
    return TargetingConfig(mode=args.mode)


def cmd_fit(args) -> int:
    w = parse_weight(args.weight)
    data = read_csv(args.csv, rescale=args.rescale)
    cfg = _run_config(args, input=os.path.basename(args.csv), n=data.n, d=data.d)
    fitter = SplineFitter(args.degree, args.trunc, args.beta)
    try:
        est = cross_fit_estimate(data, w, fitter, _targeting(args), args.alpha, seed=args.seed,
                                 diagnostics_eta=args.trunc / 4.0)
    except EstimationError as exc:
        _emit({**_provenance(cfg), "error": str(exc), "flags": ["estimation_failed"]}, args.out)
        print(f"estimation failed: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    payload = {**_provenance(cfg), **est.to_dict()}
    if data.metadata.get("rescaled"):
        payload["rescaled"] = True
    _emit(payload, args.out)
    if args.eif_out:
        with open(args.eif_out, "w", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh)
            wr.writerow(["i", "eif"])
            for i, v in enumerate(est.eif):
                wr.writerow([i, format(float(v), ".17g")])
    return EXIT_OK


def _study(args, n: int, reps: int):
    w = parse_weight(args.weight)
    dgp = get_dgp(args.dgp, args.d)
    scfg = StudyConfig(args.alpha, args.degree, args.trunc, args.beta, args.nuisance, _targeting(args))
    return run_replications(dgp, w, n, reps, scfg, seed=args.seed, workers=max(1, args.threads))


def _write_study(args, res, n: int, suffix: str) -> None:
    cfg = _run_config(args, dgp=args.dgp, d=args.d, n=n, reps=args.reps, nuisance=args.nuisance)
    res.summary.update(_provenance(cfg))
    prefix = args.out or f"{args.dgp}_{n}"
    res.write_csv(f"{prefix}{suffix}.csv")
    res.write_json(f"{prefix}{suffix}.json", dumps)


def cmd_simulate(args) -> int:
    get_dgp(args.dgp, args.d)
    for n in args.n:
        res = _study(args, n, args.reps)
        _write_study(args, res, n, "" if len(args.n) == 1 else f"_n{n}")
        s = res.summary
        print(f"{args.dgp} n={n} reps={s['reps']} failures={s['failures']} "
              f"bias={s.get('bias', float('nan')):.4g} sd={s.get('sd', float('nan')):.4g} "
              f"coverage={s.get('coverage', float('nan')):.3f}")
    return EXIT_OK


def cmd_coverage(args) -> int:
    get_dgp(args.dgp, args.d)
    scaled = {}
    for n in args.n:
        res = _study(args, n, args.reps)
        _write_study(args, res, n, f"_n{n}")
        s = res.summary
        scaled[n] = math.sqrt(n) * s.get("rmse", float("nan"))
        print(f"n={n} coverage={s.get('coverage', float('nan')):.3f} "
              f"sqrt(n)*rmse={scaled[n]:.4g} mean_ci_length={s.get('mean_ci_length', float('nan')):.4g}")
    ns = sorted(scaled)
    for lo, hi in zip(ns, ns[1:]):
        print(f"sqrt(n)*rmse ratio n={lo} vs n={hi}: {scaled[lo] / scaled[hi]:.3f}")
    return EXIT_OK


def cmd_diagnose(args) -> int:
    w = parse_weight(args.weight)
    if args.csv is None and args.dgp is None:
        raise InputError("give a CSV path or --dgp")
    dgp = None
    if args.csv is not None:
        data = read_csv(args.csv, rescale=args.rescale)
    else:
        dgp = get_dgp(args.dgp, args.d)
        data = generate(dgp, args.n, args.seed)
    plan = split_folds(data.n, args.seed)
    fold = data.subset(plan.I0)
    u0 = SplineFitter(args.degree, args.trunc, args.beta)(data.subset(plan.I1)).predict(fold.X)
    eta = args.eta if args.eta is not None else args.trunc / 4.0
    true_law = dgp.values(fold.X) if dgp is not None else None
    rep = diagnose(u0, w, eta, args.c_init, true_law)
    cfg = _run_config(args, source=args.csv and os.path.basename(args.csv) or args.dgp, n=data.n, eta=eta)
    print(rep.table())
    payload = {**_provenance(cfg), **rep.to_dict()}
    if args.out:
        _emit(payload, args.out)
    return EXIT_OK


def cmd_weights(args) -> int:
    names = [args.weight] if args.weight else [k.lower() for k in KIND_CODES if k not in ("ATB", "SmoothTrim")]
    if not args.weight:
        names += ["atb:2,2", "smoothtrim:0.1,0.01"]
    specs = [parse_weight(name) for name in names]
    print(f"{'weight':<22}{'lambda_min':>14}{'lambda_max':>14}{'c':>14}   (eta={args.eta:g})")
    for w in specs:
        b = lambda_bounds(w, args.eta)
        try:
            c = f"{frak_c(b):14.6g}"
        except ValueError:
            c = f"{'n/a':>14}"
        print(f"{w.label:<22}{b.lambda_min:14.6g}{b.lambda_max:14.6g}{c}")
    return EXIT_OK


COMMANDS = {
    "fit": cmd_fit,
    "simulate": cmd_simulate,
    "coverage": cmd_coverage,
    "diagnose": cmd_diagnose,
    "weights": cmd_weights,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (InputError, KeyError, ValueError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else str(exc)
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
