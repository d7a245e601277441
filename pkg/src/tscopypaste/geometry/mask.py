import numpy as np
from scipy import ndimage

from . import _select

_EIGHT = np.ones((3, 3), dtype=bool)


class GeometryError(ValueError):
    pass


class BinaryMask:
    """Immutable per-pixel occupancy raster.

    ``bits`` is a read-only (height, width) bool array in row-major order;
    ``packed()`` gives the 1-bit-per-pixel byte form.
    """

    __slots__ = ("_bits",)

    def __init__(self, bits):
        arr = np.array(bits, dtype=bool, copy=True)
        if arr.ndim != 2:
            raise GeometryError(f"mask must be 2-D, got shape {arr.shape}")
        arr.setflags(write=False)
        self._bits = arr

    @classmethod
    def zeros(cls, width, height):
        return cls(np.zeros((height, width), dtype=bool))

    @classmethod
    def from_packed(cls, data, width, height):
        flat = np.unpackbits(np.frombuffer(data, dtype=np.uint8), count=width * height)
        return cls(flat.reshape(height, width))

    @property
    def bits(self):
        return self._bits

    @property
    def width(self):
        return self._bits.shape[1]

    @property
    def height(self):
        return self._bits.shape[0]

    @property
    def shape(self):
        return self._bits.shape

    def packed(self):
        return np.packbits(self._bits, axis=None).tobytes()

    def __eq__(self, other):
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self._bits, other._bits))

    __hash__ = None

    def __repr__(self):
        return f"BinaryMask({self.width}x{self.height}, area={mask_area(self)})"


def _check_polygon(poly):
    if len(poly) % 2 or len(poly) < 6:
        raise GeometryError(
            f"polygon needs an even number of >= 6 coordinates, got {len(poly)}")


def rasterize_window(polygons, x0, y0, width, height):
    """Rasterize into the window [x0, x0 + width) x [y0, y0 + height).

    Returns a uint8 array of shape (height, width); pixel (i, j) of the window
    is global pixel (x0 + i, y0 + j).
    """
    out = np.zeros((height, width), dtype=np.uint8)
    for poly in polygons:
        _check_polygon(poly)
        _select.kernels.rasterize_polygon(out, np.asarray(poly, dtype=np.float64), x0, y0)
    return out


def rasterize(polygons, width, height):
    """Union of polygon interiors, sampled at pixel centers (even-odd rule)."""
    if width < 1 or height < 1:
        raise GeometryError(f"raster must be at least 1x1, got {width}x{height}")
    return BinaryMask(rasterize_window(polygons, 0, 0, width, height))


def polygon_window(polygons, width, height):
    """Integer window of the raster that can contain set pixels, or None."""
    xs = np.concatenate([np.asarray(p, dtype=np.float64)[0::2] for p in polygons])
    ys = np.concatenate([np.asarray(p, dtype=np.float64)[1::2] for p in polygons])
    x0 = max(int(np.floor(xs.min())) - 1, 0)
    y0 = max(int(np.floor(ys.min())) - 1, 0)
    x1 = min(int(np.ceil(xs.max())) + 1, width)
    y1 = min(int(np.ceil(ys.max())) + 1, height)
    if x1 <= x0 or y1 <= y0:
        return None
    return x0, y0, x1 - x0, y1 - y0


def rasterized_stats(polygons, width, height):
    """(area, bbox) of the rasterized polygons without a full-size raster."""
    for poly in polygons:
        _check_polygon(poly)
    if not polygons:
        return 0, None
    win = polygon_window(polygons, width, height)
    if win is None:
        return 0, None
    x0, y0, w, h = win
    sub = rasterize_window(polygons, x0, y0, w, h)
    box = _bounds(sub)
    if box is None:
        return 0, None
    return int(_select.kernels.count_set(sub)), (box[0] + x0, box[1] + y0, box[2], box[3])


def mask_area(m):
    return int(_select.kernels.count_set(m.bits))


def _bounds(bits):
    rows = np.flatnonzero(bits.any(axis=1))
    if rows.size == 0:
        return None
    cols = np.flatnonzero(bits.any(axis=0))
    return (int(cols[0]), int(rows[0]),
            int(cols[-1] - cols[0] + 1), int(rows[-1] - rows[0] + 1))


def mask_bounds(m):
    """Tight [x, y, w, h] of the set pixels, or None for an empty mask."""
    return _bounds(m.bits)


def _same_shape(a, b):
    if a.shape != b.shape:
        raise GeometryError(
            f"mask dimensions differ: {a.width}x{a.height} vs {b.width}x{b.height}")


def mask_subtract(a, b):
    _same_shape(a, b)
    return BinaryMask(a.bits & ~b.bits)


def mask_intersect(a, b):
    _same_shape(a, b)
    return BinaryMask(a.bits & b.bits)


def mask_union(a, b):
    _same_shape(a, b)
    return BinaryMask(a.bits | b.bits)


def translate_mask(m, dx, dy, out_width, out_height):
    """Shift ``m`` by (dx, dy) onto an out_width x out_height raster."""
    out = np.zeros((out_height, out_width), dtype=bool)
    sx0, sy0 = max(0, -dx), max(0, -dy)
    sx1, sy1 = min(m.width, out_width - dx), min(m.height, out_height - dy)
    if sx1 > sx0 and sy1 > sy0:
        out[sy0 + dy:sy1 + dy, sx0 + dx:sx1 + dx] = m.bits[sy0:sy1, sx0:sx1]
    return BinaryMask(out)


def mask_perimeter(m):
    """Number of unit pixel edges separating set pixels from unset ones or the border."""
    p = np.pad(m.bits, 1)
    return int(np.count_nonzero(p[1:, :] != p[:-1, :]) + np.count_nonzero(p[:, 1:] != p[:, :-1]))


def _signed_area2(verts):
    x, y = verts[:, 0], verts[:, 1]
    return int(x[:-1] @ y[1:] - x[1:] @ y[:-1] + x[-1] * y[0] - x[0] * y[-1])


def _unit_square(x, y):
    return [x, y, x, y + 1, x + 1, y + 1, x + 1, y]


def trace_contours(m, keep_holes=True, min_component_area=4):
    """Polygons (flat integer corner lists) outlining each 8-connected component.

    Outlines follow pixel edges, so filling them at pixel centers gives back the
    component exactly. Holes are spliced into their component's outline through
    a zero-width seam; with ``keep_holes=False`` they are left out instead and
    the hole pixels fill in. Components smaller than ``min_component_area``
    pixels are emitted as one unit square per pixel.
    """
    box = mask_bounds(m)
    if box is None:
        return []
    bx, by, bw, bh = box
    sub = m.bits[by:by + bh, bx:bx + bw]
    labels, count = ndimage.label(sub, structure=_EIGHT)
    sizes = np.bincount(labels.ravel(), minlength=count + 1)

    outer = {}
    holes = {}
    for verts, (sx, sy) in _select.kernels.trace_loops(sub.view(np.uint8)):
        lab = int(labels[sy, sx])
        if _signed_area2(verts) < 0:
            outer[lab] = verts
        else:
            holes.setdefault(lab, []).append(verts)

    polygons = []
    for lab in range(1, count + 1):
        if sizes[lab] < min_component_area:
            ys, xs = np.nonzero(labels == lab)
            for x, y in zip(xs.tolist(), ys.tolist()):
                polygons.append(_unit_square(x + bx, y + by))
            continue
        ring = outer[lab] + (bx, by)
        flat = ring.ravel().tolist()
        if keep_holes:
            anchor = flat[:2]
            for hole in holes.get(lab, ()):
                h = (hole + (bx, by)).ravel().tolist()
                flat += anchor + h + h[:2]
            if holes.get(lab):
                flat += anchor
        polygons.append(flat)
    return polygons
