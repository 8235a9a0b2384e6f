# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the kernels in ``_pure``.

Same algorithms, same argument conventions.  ``radial_ball_mass`` handles
d in {2, 3} natively and defers other dimensions to the numpy version.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport acos, cos, sin, sqrt, fabs, floor, pow, expm1, log1p, M_PI
from libcpp.vector cimport vector

from . import _pure

cnp.import_array()

cdef int RADIAL_EDGE = 1
cdef int RADIAL_INTERIOR = 2


cdef double _binom(int n, int k) noexcept nogil:
    cdef double out = 1.0
    cdef int i
    for i in range(1, k + 1):
        out = out * (n - k + i) / i
    return out


cdef double _partial_integral(double rho, int kind, double r_in, double p, int d) noexcept nogil:
    cdef double out = 0.0, u, m, log_rest, one_minus
    cdef int k
    if kind == RADIAL_EDGE:
        if rho < r_in:
            rho = r_in
        if rho > 1.0:
            rho = 1.0
        u = rho - r_in
        for k in range(d):
            out += _binom(d - 1, k) * pow(r_in, d - 1 - k) * pow(u, p + k + 1) / (p + k + 1)
    else:
        if rho < 0.0:
            rho = 0.0
        if rho >= 1.0:
            for k in range(d):
                m = p + k + 1
                out += _binom(d - 1, k) * (1.0 if k % 2 == 0 else -1.0) / m
            return out
        log_rest = log1p(-rho)
        for k in range(d):
            m = p + k + 1
            one_minus = -expm1(m * log_rest)
            out += _binom(d - 1, k) * (1.0 if k % 2 == 0 else -1.0) * one_minus / m
    return out


cdef inline double _ipow(double x, double p) noexcept nogil:
    if p == 1.0:
        return x
    if p == 2.0:
        return x * x
    return pow(x, p)


cdef double _profile(double rho, int kind, double r_in, double p) noexcept nogil:
    if kind == RADIAL_EDGE:
        if rho < r_in or rho > 1.0:
            return 0.0
        return _ipow(rho - r_in, p)
    if rho > 1.0:
        return 0.0
    return _ipow(1.0 - rho, p)


def radial_ball_mass(s, r, int kind, double r_in, double p, int d, double scale,
                     t_nodes, t_weights):
    if d != 2 and d != 3:
        return _pure.radial_ball_mass(s, r, kind, r_in, p, d, scale, t_nodes, t_weights)
    s_b, r_b = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(r, dtype=float))
    cdef const double[::1] sv = np.ascontiguousarray(s_b.ravel())
    cdef const double[::1] rv = np.ascontiguousarray(r_b.ravel())
    cdef const double[::1] tn = np.ascontiguousarray(t_nodes, dtype=float)
    cdef const double[::1] tw = np.ascontiguousarray(t_weights, dtype=float)
    cdef Py_ssize_t n = sv.shape[0], q = tn.shape[0], i, k
    out_arr = np.empty(n, dtype=float)
    cdef double[::1] out = out_arr
    cdef double lo_support = r_in if kind == RADIAL_EDGE else 0.0
    cdef double j0 = _partial_integral(lo_support, kind, r_in, p, d)
    cdef double si, ri, full, partial, a, b, half, rho, jac, cos_t, frac, inner
    # node-only factors, computed once
    cdef double[::1] one_minus_cos = 1.0 - np.cos(np.asarray(tn))
    cdef double[::1] sin_t = np.sin(np.asarray(tn))
    with nogil:
        for i in range(n):
            si = sv[i]
            ri = rv[i]
            full = 0.0
            if ri > si:
                inner = ri - si
                if inner < lo_support:
                    inner = lo_support
                if inner > 1.0:
                    inner = 1.0
                full = _partial_integral(inner, kind, r_in, p, d) - j0
            a = fabs(si - ri)
            if a < lo_support:
                a = lo_support
            b = si + ri
            if b > 1.0:
                b = 1.0
            partial = 0.0
            if b > a and si > 0.0:
                half = 0.5 * (b - a)
                for k in range(q):
                    rho = a + half * one_minus_cos[k]
                    jac = half * sin_t[k]
                    cos_t = (rho * rho + si * si - ri * ri) / (2.0 * rho * si)
                    if cos_t > 1.0:
                        cos_t = 1.0
                    elif cos_t < -1.0:
                        cos_t = -1.0
                    if d == 2:
                        frac = acos(cos_t) / M_PI
                    else:
                        frac = 0.5 * (1.0 - cos_t)
                    partial += tw[k] * _profile(rho, kind, r_in, p) * (rho if d == 2 else rho * rho) * frac * jac
            out[i] = scale * (full + partial)
    return out_arr


cdef inline double _pdist(const double[:, ::1] pts, Py_ssize_t i, Py_ssize_t j, int d, int p_code) noexcept nogil:
    cdef double acc = 0.0, t
    cdef int k
    for k in range(d):
        t = fabs(pts[i, k] - pts[j, k])
        if p_code == 0:
            if t > acc:
                acc = t
        elif p_code == 1:
            acc += t
        else:
            acc += t * t
    if p_code == 2:
        return sqrt(acc)
    return acc


def grid_out_edges(points, radii, int p_code, origin, double cell, dims):
    cdef const double[:, ::1] pts = np.ascontiguousarray(points, dtype=float)
    cdef const double[::1] rad = np.ascontiguousarray(radii, dtype=float)
    cdef Py_ssize_t n = pts.shape[0]
    cdef int d = pts.shape[1]
    if n == 0:
        return np.zeros(1, dtype=np.int64), np.zeros(0, dtype=np.int64)
    dims_np = np.asarray(dims, dtype=np.int64)
    org = np.asarray(origin, dtype=float)
    coords_np = np.clip(np.floor((np.asarray(points, dtype=float) - org) / cell).astype(np.int64),
                        0, dims_np - 1)
    keys_np = np.ravel_multi_index(coords_np.T, dims_np).astype(np.int64)
    order_np = np.argsort(keys_np, kind="stable").astype(np.int64)
    ncells = int(np.prod(dims_np))
    start_np = np.searchsorted(keys_np[order_np], np.arange(ncells + 1)).astype(np.int64)
    offsets_np = _pure.grid_offsets(d)
    strides_np = np.ones(d, dtype=np.int64)
    for k in range(d - 2, -1, -1):
        strides_np[k] = strides_np[k + 1] * dims_np[k + 1]

    cdef const cnp.int64_t[:, ::1] coords = np.ascontiguousarray(coords_np)
    cdef const cnp.int64_t[::1] order = order_np
    cdef const cnp.int64_t[::1] cstart = start_np
    cdef const cnp.int64_t[:, ::1] offsets = np.ascontiguousarray(offsets_np)
    cdef const cnp.int64_t[::1] dimv = dims_np
    cdef const cnp.int64_t[::1] strides = strides_np
    cdef Py_ssize_t noff = offsets.shape[0], i, o, t, j, key, c
    cdef int k2
    cdef bint ok
    cdef vector[cnp.int64_t] dst
    indptr_np = np.zeros(n + 1, dtype=np.int64)
    cdef cnp.int64_t[::1] indptr = indptr_np
    cdef Py_ssize_t row_start
    with nogil:
        for i in range(n):
            row_start = dst.size()
            for o in range(noff):
                key = 0
                ok = True
                for k2 in range(d):
                    c = coords[i, k2] + offsets[o, k2]
                    if c < 0 or c >= dimv[k2]:
                        ok = False
                        break
                    key += c * strides[k2]
                if not ok:
                    continue
                for t in range(cstart[key], cstart[key + 1]):
                    j = order[t]
                    if j != i and _pdist(pts, i, j, d, p_code) <= rad[i]:
                        dst.push_back(j)
            indptr[i + 1] = dst.size()
    indices_np = np.empty(dst.size(), dtype=np.int64)
    cdef cnp.int64_t[::1] ind = indices_np
    for t in range(<Py_ssize_t>dst.size()):
        ind[t] = dst[t]
    src_np = np.repeat(np.arange(n, dtype=np.int64), np.diff(indptr_np))
    return indptr_np, indices_np[np.lexsort((indices_np, src_np))]


cdef Py_ssize_t _find(cnp.int64_t[::1] parent, Py_ssize_t x) noexcept nogil:
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


def count_components(Py_ssize_t n, src, dst):
    if n == 0:
        return 0
    parent_np = np.arange(n, dtype=np.int64)
    size_np = np.ones(n, dtype=np.int64)
    cdef cnp.int64_t[::1] parent = parent_np
    cdef cnp.int64_t[::1] size = size_np
    cdef const cnp.int64_t[::1] sv = np.ascontiguousarray(src, dtype=np.int64)
    cdef const cnp.int64_t[::1] dv = np.ascontiguousarray(dst, dtype=np.int64)
    cdef Py_ssize_t m = sv.shape[0], e, a, b
    cdef Py_ssize_t comps = n
    with nogil:
        for e in range(m):
            a = _find(parent, sv[e])
            b = _find(parent, dv[e])
            if a == b:
                continue
            if size[a] < size[b]:
                a, b = b, a
            parent[b] = a
            size[a] += size[b]
            comps -= 1
    return int(comps)
