"""Monte Carlo studies shared between test modules (computed once per session)."""
import os
from functools import lru_cache

from wate_tmle.simlab import StudyConfig, get_dgp, run_replications
from wate_tmle.weights import parse_weight

WORKERS = os.cpu_count() or 1
COVERAGE_REPS = 500
SEEDS = {"ato": 7001, "ate": 7002}


@lru_cache(maxsize=None)
def coverage_study(weight: str, n: int):
    """Smooth-heterogeneous design, d=1, cubic splines truncated at 0.04."""
    cfg = StudyConfig(alpha=0.05, degree=3, eta0=0.04)
    return run_replications(get_dgp("smooth", 1), parse_weight(weight), n, COVERAGE_REPS, cfg,
                            seed=SEEDS[weight] + n, workers=WORKERS)
