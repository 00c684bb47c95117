"""Backend selection for the numeric kernels.

``ROBUST_CROWDSENSE_BACKEND=numpy`` forces the pure-numpy path; the default is
numba when it imports cleanly.
"""

import os

BACKEND_ENV = "ROBUST_CROWDSENSE_BACKEND"
THREADS_ENV = "ROBUST_CROWDSENSE_THREADS"

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAS_NUMBA = False


def requested_backend():
    name = os.environ.get(BACKEND_ENV, "numba").strip().lower()
    if name not in ("numba", "numpy"):
        raise ValueError(f"{BACKEND_ENV} must be 'numba' or 'numpy', got {name!r}")
    if name == "numba" and not HAS_NUMBA:
        return "numpy"
    return name


def njit(*args, **kwargs):
    """``numba.njit`` when available, identity decorator otherwise."""
    if HAS_NUMBA:
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda fn: fn


def worker_count():
    """Worker cap from ``ROBUST_CROWDSENSE_THREADS`` (0 or unset = auto)."""
    raw = os.environ.get(THREADS_ENV, "0").strip() or "0"
    n = int(raw)
    if n < 0:
        raise ValueError(f"{THREADS_ENV} must be >= 0")
    if n == 0:
        n = os.cpu_count() or 1
    return n
