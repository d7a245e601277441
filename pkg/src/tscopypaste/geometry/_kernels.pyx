# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled raster kernels; see ``_fallback.py`` for the reference behaviour."""
import numpy as np
cimport numpy as cnp
from libc.math cimport ceil
from libc.stdlib cimport malloc, free

cnp.import_array()

cdef int EAST = 0
cdef int SOUTH = 1
cdef int WEST = 2
cdef int NORTH = 3
cdef int DX[4]
cdef int DY[4]
DX[:] = [1, 0, -1, 0]
DY[:] = [0, 1, 0, -1]


cdef inline long first_center(double v) nogil:
    cdef double k = ceil(v - 0.5)
    if k + 0.5 < v:
        k += 1
    if k - 0.5 >= v:
        k -= 1
    return <long>k


def rasterize_polygon(unsigned char[:, ::1] out, coords, long ox=0, long oy=0):
    cdef double[::1] c = np.ascontiguousarray(coords, dtype=np.float64)
    cdef Py_ssize_t n = c.shape[0] // 2
    cdef long h = out.shape[0], w = out.shape[1]
    cdef Py_ssize_t e, k, a, b, total, pos
    cdef double xa, ya, xb, yb, py, t
    cdef long jlo, jhi, j, r, c0, c1, i
    if n == 0:
        return out

    cdef long *counts = <long *>malloc((h + 1) * sizeof(long))
    cdef long *fill = <long *>malloc((h + 1) * sizeof(long))
    cdef double *xs = NULL
    if counts == NULL or fill == NULL:
        free(counts)
        free(fill)
        raise MemoryError()
    try:
        with nogil:
            for r in range(h + 1):
                counts[r] = 0
            # pass 1: crossings per row
            for e in range(n):
                a = e
                b = (e + 1) % n
                if c[2 * a + 1] > c[2 * b + 1]:
                    a, b = b, a
                ya = c[2 * a + 1]
                yb = c[2 * b + 1]
                if not ya < yb:
                    continue
                jlo = first_center(ya)
                jhi = first_center(yb)
                if jlo < oy:
                    jlo = oy
                if jhi > oy + h:
                    jhi = oy + h
                for j in range(jlo, jhi):
                    counts[j - oy + 1] += 1
            for r in range(h):
                counts[r + 1] += counts[r]
            total = counts[h]
        if total == 0:
            return out
        xs = <double *>malloc(total * sizeof(double))
        if xs == NULL:
            raise MemoryError()
        with nogil:
            for r in range(h + 1):
                fill[r] = counts[r]
            # pass 2: crossing x per row
            for e in range(n):
                a = e
                b = (e + 1) % n
                if c[2 * a + 1] > c[2 * b + 1]:
                    a, b = b, a
                xa = c[2 * a]
                ya = c[2 * a + 1]
                xb = c[2 * b]
                yb = c[2 * b + 1]
                if not ya < yb:
                    continue
                jlo = first_center(ya)
                jhi = first_center(yb)
                if jlo < oy:
                    jlo = oy
                if jhi > oy + h:
                    jhi = oy + h
                for j in range(jlo, jhi):
                    py = j + 0.5
                    xs[fill[j - oy]] = xa + (py - ya) * (xb - xa) / (yb - ya)
                    fill[j - oy] += 1
            # pass 3: sort each row and fill spans
            for r in range(h):
                a = counts[r]
                b = counts[r + 1]
                for k in range(a + 1, b):
                    t = xs[k]
                    pos = k - 1
                    while pos >= a and xs[pos] > t:
                        xs[pos + 1] = xs[pos]
                        pos -= 1
                    xs[pos + 1] = t
                k = a
                while k + 1 < b:
                    c0 = first_center(xs[k]) - ox
                    c1 = first_center(xs[k + 1]) - ox
                    if c0 < 0:
                        c0 = 0
                    if c1 > w:
                        c1 = w
                    for i in range(c0, c1):
                        out[r, i] = 1
                    k += 2
    finally:
        free(counts)
        free(fill)
        free(xs)
    return out


cdef inline bint pix(const unsigned char[:, ::1] m, long x, long y) nogil:
    if x < 0 or y < 0 or y >= m.shape[0] or x >= m.shape[1]:
        return False
    return m[y, x] != 0


cdef inline int outgoing(const unsigned char[:, ::1] m, long x, long y) nogil:
    cdef bint tl = pix(m, x - 1, y - 1)
    cdef bint tr = pix(m, x, y - 1)
    cdef bint bl = pix(m, x - 1, y)
    cdef bint br = pix(m, x, y)
    cdef int bits = 0
    if tr and not br:
        bits |= 1 << EAST
    if br and not bl:
        bits |= 1 << SOUTH
    if bl and not tl:
        bits |= 1 << WEST
    if tl and not tr:
        bits |= 1 << NORTH
    return bits


cdef inline int lowest_bit(int v) nogil:
    cdef int d = 0
    while not (v >> d) & 1:
        d += 1
    return d


def trace_loops(m_in):
    cdef const unsigned char[:, ::1] m = np.ascontiguousarray(m_in, dtype=np.uint8)
    cdef long h = m.shape[0], w = m.shape[1]
    # used-edge flags per grid vertex, (h + 1) x (w + 1)
    cdef unsigned char[:, ::1] used = np.zeros((h + 1, w + 1), dtype=np.uint8)
    cdef long x, y, sx, sy, cx, cy, seedx, seedy
    cdef int sd, d, prev, out, start
    loops = []
    cdef list verts
    for y in range(h):
        for x in range(w):
            if m[y, x] == 0:
                continue
            for start in range(2):
                if start == 0:
                    sx = x + 1
                    sy = y
                    sd = WEST
                    seedx = x
                    seedy = y
                else:
                    sx = x
                    sy = y
                    sd = SOUTH
                    seedx = x
                    seedy = y
                if not (outgoing(m, sx, sy) >> sd) & 1:
                    continue
                if (used[sy, sx] >> sd) & 1:
                    continue
                verts = []
                cx = sx
                cy = sy
                d = sd
                prev = -1
                while True:
                    used[cy, cx] |= 1 << d
                    if d != prev:
                        verts.append((cx, cy))
                    cx += DX[d]
                    cy += DY[d]
                    prev = d
                    out = outgoing(m, cx, cy)
                    if out & (out - 1):
                        d = (prev + 1) % 4
                    else:
                        d = lowest_bit(out)
                    if (used[cy, cx] >> d) & 1:
                        break
                if len(verts) > 1 and prev == sd:
                    verts = verts[1:]
                loops.append((np.array(verts, dtype=np.int64), (seedx, seedy)))
    return loops


def count_set(m_in):
    cdef const unsigned char[:, ::1] m = np.ascontiguousarray(m_in).view(np.uint8)
    cdef Py_ssize_t i, j
    cdef long total = 0
    with nogil:
        for i in range(m.shape[0]):
            for j in range(m.shape[1]):
                total += m[i, j] != 0
    return total
