"""Compare the numba and numpy kernel backends.

Usage: ``python benchmarks/bench_kernels.py [--sizes 500 5000] [--repeat 5]``

Prints the best-of-``repeat`` wall time per call for each kernel and the
speedup of numba over numpy, after one warm-up call (which also triggers JIT
compilation).
"""
import argparse
import time

import numpy as np

from wate_tmle._kernels import get_backend
from wate_tmle.weights import parse_weight


def _best(fn, repeat):
    fn()
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run(sizes, repeat, weight="ATO"):
    kind, p1, p2 = parse_weight(weight).code
    nb, npy = get_backend("numba"), get_backend("numpy")
    rows = []
    for m in sizes:
        rng = np.random.default_rng(m)
        q1, q0, e = (rng.uniform(0.1, 0.9, m) for _ in range(3))
        a = rng.integers(0, 2, m)
        y = rng.integers(0, 2, m)
        cases = {
            "rk4_step": lambda K: K.rk4_step(q1, q0, e, 1e-3, kind, p1, p2),
            "eif_obs": lambda K: K.eif_obs(q1, q0, e, a, y, kind, p1, p2, True),
            "loglik_score": lambda K: K.loglik_score(q1, q0, e, a, y, kind, p1, p2),
        }
        for name, call in cases.items():
            t_nb = _best(lambda: call(nb), repeat)
            t_np = _best(lambda: call(npy), repeat)
            rows.append((name, m, t_nb, t_np))
    return rows


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=int, nargs="+", default=[500, 5000, 50000])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--weight", default="ato", help="weight name as accepted by the CLI")
    args = ap.parse_args()
    print(f"{'kernel':<14}{'m':>8}{'numba [us]':>14}{'numpy [us]':>14}{'speedup':>10}")
    for name, m, t_nb, t_np in run(args.sizes, args.repeat, args.weight):
        print(f"{name:<14}{m:>8}{t_nb * 1e6:>14.1f}{t_np * 1e6:>14.1f}{t_np / t_nb:>10.2f}")


if __name__ == "__main__":
    main()
