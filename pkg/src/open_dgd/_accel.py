"""Optional numba acceleration.

The backend is chosen once at import time from ``OPEN_DGD_BACKEND``
(``numba`` or ``numpy``).  When numba is missing the numpy path is used
regardless of the flag.
"""
import logging
import os

logger = logging.getLogger(__name__)

try:
    import numba

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    NUMBA_AVAILABLE = False

BACKENDS = ("numba", "numpy")


def _default_backend():
    requested = os.environ.get("OPEN_DGD_BACKEND", "").strip().lower()
    if requested in ("", "auto"):
        return "numba" if NUMBA_AVAILABLE else "numpy"
    if requested not in BACKENDS:
        raise ValueError(
            f"OPEN_DGD_BACKEND must be one of {BACKENDS}, got {requested!r}"
        )
    if requested == "numba" and not NUMBA_AVAILABLE:
        logger.warning("numba requested but not importable; using numpy")
        return "numpy"
    return requested


BACKEND = _default_backend()


def available_backends():
    return BACKENDS if NUMBA_AVAILABLE else ("numpy",)


def resolve(backend=None):
    """Return a concrete backend name, defaulting to the env selection."""
    if backend is None:
        return BACKEND
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and not NUMBA_AVAILABLE:
        return "numpy"
    return backend


def njit(fn):
    """Compile ``fn`` in nopython mode, or return it unchanged without numba."""
    if not NUMBA_AVAILABLE:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)
