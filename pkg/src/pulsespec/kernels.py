"""Kernel backend selection.

The compiled extension is used when it imports; setting the environment
variable ``PULSESPEC_PURE_PYTHON=1`` forces the numpy fallback.
"""
import os

import numpy as np

from . import _kernels_py

_compiled = None
if not os.environ.get("PULSESPEC_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None

_impl = _compiled if _compiled is not None else _kernels_py
BACKEND = "cython" if _compiled is not None else "numpy"


def backend(name=None):
    """Return the kernel module called ``name`` ("cython" or "numpy")."""
    if name is None:
        return _impl
    if name == "numpy":
        return _kernels_py
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernels are not available")
        return _compiled
    raise ValueError(f"unknown kernel backend {name!r}")




def _c(x):
    return np.ascontiguousarray(x, dtype=complex)


def _f(x):
    return np.ascontiguousarray(x, dtype=float)


def step_maps(A, h, a, b, impl=None):
    return (impl or _impl).step_maps(_c(A), _f(h), _f(a), _f(b))


def step_affine(A, F, h, a, b, impl=None):
    return (impl or _impl).step_affine(_c(A), _c(F), _f(h), _f(a), _f(b))


def stage_values(A, F, h, a, b, y, impl=None):
    F = None if F is None else _c(F)
    return (impl or _impl).stage_values(_c(A), F, _f(h), _f(a), _f(b), _c(y))


def chain(R, starts, impl=None):
    return (impl or _impl).chain(_c(R), np.asarray(starts, dtype=np.int_))


def chain_affine(R, r, starts, impl=None):
    return (impl or _impl).chain_affine(_c(R), _c(r), np.asarray(starts, dtype=np.int_))


def frame_sweep(R, Y0, every, impl=None):
    return (impl or _impl).frame_sweep(_c(R), _c(Y0), int(every))
