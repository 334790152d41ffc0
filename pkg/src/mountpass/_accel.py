"""Backend selection for the hot kernels.

Kernels are written once in a numba-compatible subset of Python. Under the
``numba`` backend they are compiled with ``@njit``; under ``numpy`` the plain
function runs against numpy arrays (the benchmark functionals also ship
vectorized variants for that case). Select with the ``MOUNTPASS_BACKEND``
environment variable (``numba`` or ``numpy``), read once at import time.

Functionals reach the compiled flow kernel as first-class function pointers
with fixed signatures, so the kernel is compiled (and cached on disk) once
rather than once per functional.
"""

from __future__ import annotations

import os

_REQUESTED = os.environ.get("MOUNTPASS_BACKEND", "numba").strip().lower()
if _REQUESTED not in ("numba", "numpy"):
    raise ImportError(f"MOUNTPASS_BACKEND must be 'numba' or 'numpy', got {_REQUESTED!r}")

try:
    if _REQUESTED != "numba":
        raise ImportError
    import numba as _numba
    from numba import types as _t
    from numba.core.registry import CPUDispatcher as _Dispatcher

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - depends on environment
    _numba = None
    _Dispatcher = ()
    HAVE_NUMBA = False

BACKEND = "numba" if HAVE_NUMBA else "numpy"

if HAVE_NUMBA:
    VEC = _t.float64[::1]
    MAT = _t.float64[:, ::1]
    VALUE_SIG = _t.float64(VEC)
    GRAD_SIG = VEC(VEC)
    PRED_SIG = _t.boolean(_t.float64, VEC, _t.float64, _t.float64)
    VALUE_FN = _t.FunctionType(VALUE_SIG)
    GRAD_FN = _t.FunctionType(GRAD_SIG)
    PRED_FN = _t.FunctionType(PRED_SIG)
    F64 = _t.float64
    BOOL = _t.boolean
else:  # pragma: no cover - depends on environment
    VEC = MAT = VALUE_SIG = GRAD_SIG = PRED_SIG = None
    VALUE_FN = GRAD_FN = PRED_FN = F64 = BOOL = None


def kernel(fn=None, *, sig=None, **options):
    """``njit`` under the numba backend, identity under numpy.

    The undecorated function stays reachable as ``.py_func`` either way.
    """

    def wrap(f):
        if HAVE_NUMBA:
            if sig is None:
                return _numba.njit(**options)(f)
            return _numba.njit(sig, **options)(f)
        f.py_func = f
        return f

    if fn is None:
        return wrap
    return wrap(fn)


def value_kernel(fn=None, **options):
    """Compile ``x -> float`` for use as a functional value."""
    return kernel(fn, sig=VALUE_SIG, **options)


def grad_kernel(fn=None, **options):
    """Compile ``x -> array`` for use as a functional gradient."""
    return kernel(fn, sig=GRAD_SIG, **options)


def predicate_kernel(fn=None, **options):
    """Compile ``(t, x, f, gnorm) -> bool`` for use as a flow stop predicate."""
    return kernel(fn, sig=PRED_SIG, **options)


def function_pointer(fn, sig) -> bool:
    """True when ``fn`` is a numba dispatcher with (or able to build) an overload for ``sig``."""
    if not HAVE_NUMBA or not isinstance(fn, _Dispatcher):
        return False
    if sig.args in fn.overloads:
        return True
    if not fn._can_compile:
        return False
    try:
        fn.compile(sig)
    except Exception:
        return False
    return True


def pick(compiled, fallback):
    """``compiled`` under the numba backend, else ``fallback``."""
    return compiled if HAVE_NUMBA else fallback
