"""Raster geometry: polygon fill, binary mask algebra and contour tracing.

The hot loops live in a compiled extension (``_kernels``). When it is not
available, or ``TSCOPYPASTE_PURE_PYTHON`` is set, the numpy implementation in
``_fallback`` is used instead. ``backend()`` names the active one.
"""
from . import _select
from ._select import available, use_backend
from .mask import (
    BinaryMask,
    GeometryError,
    mask_area,
    mask_bounds,
    mask_intersect,
    mask_perimeter,
    mask_subtract,
    mask_union,
    rasterize,
    trace_contours,
    translate_mask,
)


def backend():
    return _select.name


__all__ = [
    "BinaryMask",
    "GeometryError",
    "available",
    "backend",
    "mask_area",
    "mask_bounds",
    "mask_intersect",
    "mask_perimeter",
    "mask_subtract",
    "mask_union",
    "rasterize",
    "trace_contours",
    "translate_mask",
    "use_backend",
]
