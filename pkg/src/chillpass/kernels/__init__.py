"""Hot inner loops, compiled with numba when available.

Set ``CHILLPASS_BACKEND=numpy`` to force the pure-numpy path (useful when
debugging or on platforms without numba). ``BACKEND`` records the choice.
"""
import logging
import os

from . import _numpy

log = logging.getLogger(__name__)

BACKEND_ENV = "CHILLPASS_BACKEND"


def _load_backend():
    wanted = os.environ.get(BACKEND_ENV, "numba").strip().lower()
    if wanted not in ("numba", "numpy"):
        raise ValueError(f"{BACKEND_ENV} must be 'numba' or 'numpy', got {wanted!r}")
    if wanted == "numpy":
        return "numpy", _numpy
    try:
        from . import _numba
    except ImportError:  # pragma: no cover - numba is a declared dependency
        log.warning("numba unavailable, falling back to numpy kernels")
        return "numpy", _numpy
    return "numba", _numba


BACKEND, _impl = _load_backend()

chill_runs = _impl.chill_runs
intersect_intervals = _impl.intersect_intervals
mean_relative_difference = _impl.mean_relative_difference
bin_agreement = _impl.bin_agreement
longest_true_run = _impl.longest_true_run

__all__ = [
    "BACKEND",
    "chill_runs",
    "intersect_intervals",
    "mean_relative_difference",
    "bin_agreement",
    "longest_true_run",
]
