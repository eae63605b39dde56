"""Backend selection for the hot kernels.

``ITOWENTZELL_BACKEND`` picks the path used for the triangular field sums:

* ``auto`` (default): numba for large workloads when every coefficient is jitted,
  numpy otherwise.
* ``numba``: numba whenever the coefficients allow it.
* ``numpy``: never touch numba; catalog coefficients stay plain Python.

The flag is read once at import time.
"""

import os

BACKEND = os.environ.get("ITOWENTZELL_BACKEND", "auto").strip().lower()
if BACKEND not in ("auto", "numba", "numpy"):
    raise ImportError(f"ITOWENTZELL_BACKEND must be auto, numba or numpy, got {BACKEND!r}")

# below this many (row, query) pairs the numba compile cost is not worth paying
AUTO_MIN_PAIRS = 250_000

HAVE_NUMBA = False
if BACKEND != "numpy" and not os.environ.get("NUMBA_DISABLE_JIT"):
    try:
        import numba
        from numba.core.registry import CPUDispatcher

        HAVE_NUMBA = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        HAVE_NUMBA = False


def coefficient(fn):
    """Decorate a batched coefficient function so the numba kernels can inline it."""
    if HAVE_NUMBA:
        return numba.njit(cache=True)(fn)
    return fn


def is_jitted(fn):
    return HAVE_NUMBA and isinstance(fn, CPUDispatcher)


def python_function(fn):
    """Return the pure-Python body of a coefficient, jitted or not."""
    return getattr(fn, "py_func", fn)


def use_numba(fns, pairs):
    if not HAVE_NUMBA or BACKEND == "numpy":
        return False
    if not all(is_jitted(f) for f in fns):
        return False
    return BACKEND == "numba" or pairs >= AUTO_MIN_PAIRS
