"""Pure-Python versions of the compiled kernels."""

from collections import deque

import numpy as np


def label_components(mask):
    m = np.asarray(mask, dtype=bool)
    nr, nc = m.shape
    labels = np.zeros((nr, nc), dtype=np.int32)
    count = 0
    for i in range(nr):
        for j in range(nc):
            if not m[i, j] or labels[i, j]:
                continue
            count += 1
            labels[i, j] = count
            queue = deque([(i, j)])
            while queue:
                r, c = queue.popleft()
                for rr, cc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
                    if 0 <= rr < nr and 0 <= cc < nc and m[rr, cc] and not labels[rr, cc]:
                        labels[rr, cc] = count
                        queue.append((rr, cc))
    return labels, count


def bilinear_sample(field, x0, dx, p0, dp, xs, ps):
    f = np.asarray(field, dtype=float)
    nx, np_ = f.shape
    u = (np.asarray(xs, dtype=float) - x0) / dx
    v = (np.asarray(ps, dtype=float) - p0) / dp
    inside = (u >= 0) & (v >= 0) & (u <= nx - 1) & (v <= np_ - 1)
    i = np.clip(np.floor(u).astype(int), 0, nx - 2)
    j = np.clip(np.floor(v).astype(int), 0, np_ - 2)
    fu = u - i
    fv = v - j
    out = ((1 - fu) * (1 - fv) * f[i, j] + fu * (1 - fv) * f[i + 1, j]
           + (1 - fu) * fv * f[i, j + 1] + fu * fv * f[i + 1, j + 1])
    return np.where(inside, out, 0.0), inside


def _lagrange4(s):
    return np.stack([-s * (s - 1) * (s - 2) / 6, (s + 1) * (s - 1) * (s - 2) / 2,
                     -(s + 1) * s * (s - 2) / 2, (s + 1) * s * (s - 1) / 6])


def cubic_sample(fields, x0, dx, p0, dp, xs, ps):
    f = np.asarray(fields, dtype=float)
    nf, nx, np_ = f.shape
    if nx < 4 or np_ < 4:
        raise ValueError("cubic interpolation needs at least 4 points per axis")
    u = (np.asarray(xs, dtype=float) - x0) / dx
    v = (np.asarray(ps, dtype=float) - p0) / dp
    inside = (u >= 0) & (v >= 0) & (u <= nx - 1) & (v <= np_ - 1)
    i = np.clip(np.floor(np.where(inside, u, 0)).astype(int), 1, nx - 3)
    j = np.clip(np.floor(np.where(inside, v, 0)).astype(int), 1, np_ - 3)
    wu = _lagrange4(u - i)
    wv = _lagrange4(v - j)
    out = np.zeros((nf, u.size))
    for a in range(4):
        for b in range(4):
            out += wu[a] * wv[b] * f[:, i - 1 + a, j - 1 + b]
    return np.where(inside, out, 0.0), inside
