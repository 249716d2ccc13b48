"""Hot loops of path integration and scoring.

Two interchangeable backends with identical signatures:

* ``_numba``: explicit loops compiled with ``numba.njit`` (default)
* ``_numpy``: vectorized numpy

Set ``WATE_TMLE_DISABLE_NUMBA=1`` before import to force the numpy path.
Both modules can be imported directly for cross-checking.
"""
import os

_disabled = os.environ.get("WATE_TMLE_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

if _disabled:
    from . import _numpy as impl

    BACKEND = "numpy"
else:
    try:
        from . import _numba as impl

        BACKEND = "numba"
    except ImportError:  # numba missing
        from . import _numpy as impl

        BACKEND = "numpy"


def get_backend(name: str):
    """Return a backend module by name (``"numba"`` or ``"numpy"``)."""
    if name == "numpy":
        from . import _numpy

        return _numpy
    if name == "numba":
        from . import _numba

        return _numba
    raise ValueError(f"unknown kernel backend {name!r}")


lam = impl.lam
omega_psi = impl.omega_psi
field = impl.field
rk4_step = impl.rk4_step
eif_obs = impl.eif_obs
loglik_score = impl.loglik_score

__all__ = ["BACKEND", "get_backend", "lam", "omega_psi", "field", "rk4_step", "eif_obs", "loglik_score"]
