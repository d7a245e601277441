"""Pure numpy/Python versions of the raster kernels.

These mirror ``_kernels.pyx`` exactly, including the floating point
evaluation order of edge crossings, so both backends produce identical
bitmaps.
"""
import numpy as np

# Direction codes, clockwise in image coordinates (y grows downward):
# a right turn from ``d`` is ``(d + 1) % 4``.
EAST, SOUTH, WEST, NORTH = 0, 1, 2, 3
_STEP = ((1, 0), (0, 1), (-1, 0), (0, -1))


def _first_center_at_or_after(v):
    """Smallest integer k with k + 0.5 >= v, elementwise."""
    k = np.ceil(v - 0.5)
    k = np.where(k + 0.5 < v, k + 1, k)
    k = np.where(k - 0.5 >= v, k - 1, k)
    return k


def rasterize_polygon(out, coords, ox=0, oy=0):
    """OR the even-odd interior of one polygon into ``out``.

    ``out`` is a uint8 array of shape (h, w) whose pixel (i, j) is the global
    pixel (i + ox, j + oy); a pixel is set when its center lies inside.
    """
    h, w = out.shape
    pts = np.asarray(coords, dtype=np.float64).reshape(-1, 2)
    x0, y0 = pts[:, 0], pts[:, 1]
    nxt = np.r_[1:len(pts), 0]
    x1, y1 = x0[nxt], y0[nxt]

    # canonical orientation: crossings are computed from the lower endpoint
    swap = y0 > y1
    xa = np.where(swap, x1, x0)
    ya = np.where(swap, y1, y0)
    xb = np.where(swap, x0, x1)
    yb = np.where(swap, y0, y1)
    keep = ya < yb
    xa, ya, xb, yb = xa[keep], ya[keep], xb[keep], yb[keep]
    if xa.size == 0:
        return out

    # rows j (global) with ya <= j + 0.5 < yb
    jlo = _first_center_at_or_after(ya)
    jhi = _first_center_at_or_after(yb)
    jlo = np.maximum(jlo, oy)
    jhi = np.minimum(jhi, oy + h)
    n = np.maximum(jhi - jlo, 0).astype(np.int64)
    total = int(n.sum())
    if total == 0:
        return out

    edge = np.repeat(np.arange(n.size), n)
    start = np.repeat(np.cumsum(n) - n, n)
    rows = jlo[edge] + (np.arange(total) - start)
    py = rows + 0.5
    xs = xa[edge] + (py - ya[edge]) * (xb[edge] - xa[edge]) / (yb[edge] - ya[edge])

    order = np.lexsort((xs, rows))
    rows = rows[order].astype(np.int64) - oy
    xs = xs[order]
    r = rows[0::2]
    c0 = _first_center_at_or_after(xs[0::2]) - ox
    c1 = _first_center_at_or_after(xs[1::2]) - ox
    c0 = np.clip(c0, 0, w).astype(np.int64)
    c1 = np.clip(c1, 0, w).astype(np.int64)
    span = c1 > c0
    if not span.any():
        return out
    r, c0, c1 = r[span], c0[span], c1[span]

    rmin, rmax = int(r.min()), int(r.max())
    diff = np.zeros((rmax - rmin + 1, w + 1), dtype=np.int32)
    np.add.at(diff, (r - rmin, c0), 1)
    np.add.at(diff, (r - rmin, c1), -1)
    filled = np.cumsum(diff[:, :w], axis=1) > 0
    out[rmin:rmax + 1] |= filled.astype(np.uint8)
    return out


def _vertex_codes(m):
    """(h+1, w+1) bitmask of boundary edges leaving each grid vertex."""
    p = np.pad(m != 0, 1)
    tl, tr = p[:-1, :-1], p[:-1, 1:]
    bl, br = p[1:, :-1], p[1:, 1:]
    codes = ((tr & ~br).astype(np.uint8) << EAST) | ((br & ~bl).astype(np.uint8) << SOUTH)
    codes |= ((bl & ~tl).astype(np.uint8) << WEST) | ((tl & ~tr).astype(np.uint8) << NORTH)
    return codes


def trace_loops(m):
    """Follow every pixel-edge boundary loop of a binary raster.

    Loops keep foreground on the left and resolve diagonal vertices with a
    right turn, so foreground is 8-connected. Returns a list of
    ``(vertices, seed)`` where ``vertices`` is an (k, 2) int64 array of corner
    points with collinear points removed and ``seed`` is (x, y) of a
    foreground pixel touching the loop.
    """
    m = np.ascontiguousarray(m, dtype=np.uint8)
    h, w = m.shape
    stride = w + 1
    codes = _vertex_codes(m).ravel().tolist()
    used = bytearray(len(codes))
    loops = []
    # a loop's first edge is always a top edge (heading west) or a left edge
    # (heading south) of some pixel, so scanning pixels with either finds every loop
    p = np.pad(m != 0, 1)
    core = p[1:-1, 1:-1]
    starts = core & (~p[:-2, 1:-1] | ~p[1:-1, :-2])
    ys, xs = np.nonzero(starts)
    for y, x in zip(ys.tolist(), xs.tolist()):
        for sx, sy, sd in ((x + 1, y, WEST), (x, y, SOUTH)):
            i = sy * stride + sx
            if (codes[i] >> sd) & 1 and not (used[i] >> sd) & 1:
                loops.append(_follow(codes, used, stride, sx, sy, sd))
    return loops


def _follow(codes, used, stride, sx, sy, sd):
    seed = (sx - 1, sy) if sd == WEST else (sx, sy)
    verts = []
    x, y, d = sx, sy, sd
    prev = -1
    while True:
        i = y * stride + x
        used[i] |= 1 << d
        if d != prev:
            verts.append((x, y))
        dx, dy = _STEP[d]
        x += dx
        y += dy
        prev = d
        out = codes[y * stride + x]
        if out & (out - 1):
            d = (prev + 1) % 4
        else:
            d = out.bit_length() - 1
        if (used[y * stride + x] >> d) & 1:
            break
    # drop the start vertex if it sits mid-way along a straight run
    if len(verts) > 1 and prev == sd:
        verts = verts[1:]
    return np.array(verts, dtype=np.int64), seed


def count_set(m):
    return int(np.count_nonzero(m))
