# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: connected-component labelling and bilinear sampling."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def label_components(mask):
    """Label 4-connected True regions of a 2-D mask.

    Returns ``(labels, count)`` where labels is int32 with 0 for background
    and 1..count for components, numbered in row-major order of first pixel.
    """
    cdef const cnp.uint8_t[:, ::1] m = np.ascontiguousarray(mask, dtype=np.uint8)
    cdef Py_ssize_t nr = m.shape[0], nc = m.shape[1]
    labels_arr = np.zeros((nr, nc), dtype=np.int32)
    cdef int[:, ::1] lab = labels_arr
    stack_arr = np.empty(nr * nc + 1, dtype=np.intp)
    cdef Py_ssize_t[::1] stack = stack_arr
    cdef Py_ssize_t i, j, k, top, r, c, idx
    cdef int count = 0
    for i in range(nr):
        for j in range(nc):
            if m[i, j] == 0 or lab[i, j] != 0:
                continue
            count += 1
            lab[i, j] = count
            top = 0
            stack[top] = i * nc + j
            top += 1
            while top > 0:
                top -= 1
                idx = stack[top]
                r = idx // nc
                c = idx - r * nc
                if r > 0 and m[r - 1, c] and lab[r - 1, c] == 0:
                    lab[r - 1, c] = count
                    stack[top] = idx - nc
                    top += 1
                if r < nr - 1 and m[r + 1, c] and lab[r + 1, c] == 0:
                    lab[r + 1, c] = count
                    stack[top] = idx + nc
                    top += 1
                if c > 0 and m[r, c - 1] and lab[r, c - 1] == 0:
                    lab[r, c - 1] = count
                    stack[top] = idx - 1
                    top += 1
                if c < nc - 1 and m[r, c + 1] and lab[r, c + 1] == 0:
                    lab[r, c + 1] = count
                    stack[top] = idx + 1
                    top += 1
    return labels_arr, count


def bilinear_sample(field, double x0, double dx, double p0, double dp, xs, ps):
    """Bilinear interpolation of ``field[ix, ip]`` at scattered points.

    Returns ``(values, inside)``; points outside the grid get value 0 and
    inside = False.
    """
    cdef const double[:, ::1] f = np.ascontiguousarray(field, dtype=np.float64)
    cdef const double[::1] xv = np.ascontiguousarray(xs, dtype=np.float64)
    cdef const double[::1] pv = np.ascontiguousarray(ps, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], nx = f.shape[0], np_ = f.shape[1]
    out_arr = np.zeros(n, dtype=np.float64)
    ok_arr = np.zeros(n, dtype=np.uint8)
    cdef double[::1] out = out_arr
    cdef cnp.uint8_t[::1] ok = ok_arr
    cdef Py_ssize_t k, i, j
    cdef double u, v, fu, fv
    for k in range(n):
        u = (xv[k] - x0) / dx
        v = (pv[k] - p0) / dp
        if u < 0.0 or v < 0.0 or u > nx - 1 or v > np_ - 1:
            continue
        i = <Py_ssize_t>u
        j = <Py_ssize_t>v
        if i >= nx - 1:
            i = nx - 2
        if j >= np_ - 1:
            j = np_ - 2
        fu = u - i
        fv = v - j
        out[k] = ((1.0 - fu) * (1.0 - fv) * f[i, j] + fu * (1.0 - fv) * f[i + 1, j]
                  + (1.0 - fu) * fv * f[i, j + 1] + fu * fv * f[i + 1, j + 1])
        ok[k] = 1
    return out_arr, ok_arr.astype(bool)


cdef inline void _lagrange4(double s, double* w) noexcept nogil:
    # weights for nodes -1, 0, 1, 2 at offset s in [0, 1]
    w[0] = -s * (s - 1.0) * (s - 2.0) / 6.0
    w[1] = (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0
    w[2] = -(s + 1.0) * s * (s - 2.0) / 2.0
    w[3] = (s + 1.0) * s * (s - 1.0) / 6.0


def cubic_sample(fields, double x0, double dx, double p0, double dp, xs, ps):
    """Tensor 4-point Lagrange interpolation of a stack ``fields[k, ix, ip]``.

    Returns ``(values[k, n], inside)``.  Stencils are shifted inward at the
    edges; points outside the grid get 0 and inside = False.
    """
    cdef const double[:, :, ::1] f = np.ascontiguousarray(fields, dtype=np.float64)
    cdef const double[::1] xv = np.ascontiguousarray(xs, dtype=np.float64)
    cdef const double[::1] pv = np.ascontiguousarray(ps, dtype=np.float64)
    cdef Py_ssize_t nf = f.shape[0], nx = f.shape[1], np_ = f.shape[2]
    cdef Py_ssize_t n = xv.shape[0]
    if nx < 4 or np_ < 4:
        raise ValueError("cubic interpolation needs at least 4 points per axis")
    out_arr = np.zeros((nf, n), dtype=np.float64)
    ok_arr = np.zeros(n, dtype=np.uint8)
    cdef double[:, ::1] out = out_arr
    cdef cnp.uint8_t[::1] ok = ok_arr
    cdef Py_ssize_t k, q, a, b, i, j
    cdef double u, v, acc, wu[4], wv[4]
    with nogil:
        for k in range(n):
            u = (xv[k] - x0) / dx
            v = (pv[k] - p0) / dp
            if u < 0.0 or v < 0.0 or u > nx - 1 or v > np_ - 1:
                continue
            i = <Py_ssize_t>u
            j = <Py_ssize_t>v
            if i < 1:
                i = 1
            if i > nx - 3:
                i = nx - 3
            if j < 1:
                j = 1
            if j > np_ - 3:
                j = np_ - 3
            _lagrange4(u - i, wu)
            _lagrange4(v - j, wv)
            for q in range(nf):
                acc = 0.0
                for a in range(4):
                    for b in range(4):
                        acc = acc + wu[a] * wv[b] * f[q, i - 1 + a, j - 1 + b]
                out[q, k] = acc
            ok[k] = 1
    return out_arr, ok_arr.astype(bool)
