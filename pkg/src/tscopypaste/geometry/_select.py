"""Chooses the compiled kernels when importable, else the numpy fallback."""
import os

from . import _fallback

try:
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

if _compiled is not None and not os.environ.get("TSCOPYPASTE_PURE_PYTHON"):
    kernels = _compiled
    name = "cython"
else:
    kernels = _fallback
    name = "python"


def available():
    return ["cython", "python"] if _compiled is not None else ["python"]


def use_backend(backend):
    """Switch the active kernels ("cython" or "python"); returns the previous name."""
    global kernels, name
    previous = name
    if backend == "cython":
        if _compiled is None:
            raise ImportError("compiled kernels are not built")
        kernels = _compiled
    elif backend == "python":
        kernels = _fallback
    else:
        raise ValueError(f"unknown backend {backend!r}")
    name = backend
    return previous
