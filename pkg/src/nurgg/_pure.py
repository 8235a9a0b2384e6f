"""Pure numpy implementations of the hot kernels.

These are the reference versions; ``_core.pyx`` mirrors them loop-for-loop
and must agree to rounding.  Selected automatically when the compiled
extension is unavailable (see ``_kernels``).
"""
from __future__ import annotations

import itertools
import math

import numpy as np
from scipy import special

RADIAL_EDGE = 1  # f = A (rho - r_in)^p on [r_in, 1]
RADIAL_INTERIOR = 2  # f = A (1 - rho)^p on [0, 1]


def radial_partial_integral(rho, kind, r_in, p, d):
    """Unnormalised radial integral J(rho) = int_lo^rho g(t) t^(d-1) dt.

    ``g`` is (t - r_in)^p for the edge-vanishing profile and (1 - t)^p for
    the interior-vanishing one.  Uses a binomial expansion of t^(d-1), so
    any real p > -1 is fine; d must be an integer.
    """
    rho = np.asarray(rho, dtype=float)
    out = np.zeros_like(rho)
    if kind == RADIAL_EDGE:
        u = np.clip(rho, r_in, 1.0) - r_in
        for k in range(d):
            out += math.comb(d - 1, k) * r_in ** (d - 1 - k) * u ** (p + k + 1) / (p + k + 1)
    elif kind == RADIAL_INTERIOR:
        rho = np.clip(rho, 0.0, 1.0)
        with np.errstate(divide="ignore"):
            log_rest = np.log1p(-rho)
        for k in range(d):
            m = p + k + 1
            # 1 - (1 - rho)^m without cancellation
            one_minus = -np.expm1(m * log_rest)
            out += math.comb(d - 1, k) * (-1.0) ** k * one_minus / m
    else:
        raise ValueError(f"unknown radial kind {kind}")
    return out


def radial_profile(rho, kind, r_in, p):
    rho = np.asarray(rho, dtype=float)
    if kind == RADIAL_EDGE:
        return np.where((rho >= r_in) & (rho <= 1.0), np.clip(rho - r_in, 0.0, None) ** p, 0.0)
    return np.where(rho <= 1.0, np.clip(1.0 - rho, 0.0, None) ** p, 0.0)


def sphere_fraction(rho, s, r, d):
    """Fraction of the sphere |y| = rho lying in the l2 ball B(x, r), |x| = s."""
    cos_t = (rho * rho + s * s - r * r) / (2.0 * rho * s)
    cos_t = np.clip(cos_t, -1.0, 1.0)
    if d == 2:
        return np.arccos(cos_t) / math.pi
    if d == 3:
        return 0.5 * (1.0 - cos_t)
    half = 0.5 * special.betainc(0.5 * (d - 1), 0.5, 1.0 - cos_t * cos_t)
    return np.where(cos_t >= 0.0, half, 1.0 - half)


def radial_ball_mass(s, r, kind, r_in, p, d, scale, t_nodes, t_weights):
    """Mass of the l2 ball B(x, r) under a radial density, |x| = s.

    ``scale`` is A * |S^(d-1)|.  The part of the ball containing whole
    spheres around the origin is integrated exactly; the lens-shaped
    remainder uses Gauss-Legendre in the cosine-substituted variable, which
    absorbs the square-root endpoint behaviour of the sphere fraction.
    """
    s = np.asarray(s, dtype=float)
    r = np.asarray(r, dtype=float)
    s, r = np.broadcast_arrays(s, r)
    s = s.ravel()
    r = r.ravel()
    lo_support = r_in if kind == RADIAL_EDGE else 0.0
    j0 = radial_partial_integral(lo_support, kind, r_in, p, d)
    inner = np.clip(r - s, lo_support, 1.0)
    full = np.where(r > s, radial_partial_integral(inner, kind, r_in, p, d) - j0, 0.0)

    a = np.maximum(np.abs(s - r), lo_support)
    b = np.minimum(s + r, 1.0)
    active = (b > a) & (s > 0.0)
    partial = np.zeros_like(s)
    if np.any(active):
        aa, bb = a[active], b[active]
        ss, rr = s[active], r[active]
        half = 0.5 * (bb - aa)
        # rho = a + (b - a)(1 - cos t)/2, t in [0, pi]
        rho = aa[:, None] + half[:, None] * (1.0 - np.cos(t_nodes))[None, :]
        jac = half[:, None] * np.sin(t_nodes)[None, :]
        g = radial_profile(rho, kind, r_in, p)
        frac = sphere_fraction(rho, ss[:, None], rr[:, None], d)
        vals = g * rho ** (d - 1) * frac * jac
        partial[active] = vals @ t_weights
    return scale * (full + partial)


def grid_offsets(d, reach=1):
    return np.array(list(itertools.product(range(-reach, reach + 1), repeat=d)), dtype=np.int64)


def _pnorm_rows(diff, p_code):
    if p_code == 0:
        return np.max(np.abs(diff), axis=-1)
    if p_code == 1:
        return np.sum(np.abs(diff), axis=-1)
    return np.sqrt(np.sum(diff * diff, axis=-1))


def grid_out_edges(points, radii, p_code, origin, cell, dims, block=20000):
    """Directed edges i -> j with ||X_i - X_j|| <= radii[i], i != j.

    ``cell`` must be >= max(radii) so that only the 3^d surrounding cells
    are scanned.  Returns CSR arrays (indptr, indices) with each row sorted.
    """
    points = np.ascontiguousarray(points, dtype=float)
    radii = np.ascontiguousarray(radii, dtype=float)
    n, d = points.shape
    dims = np.asarray(dims, dtype=np.int64)
    if n == 0:
        return np.zeros(1, dtype=np.int64), np.zeros(0, dtype=np.int64)
    coords = np.floor((points - origin) / cell).astype(np.int64)
    coords = np.clip(coords, 0, dims - 1)
    keys = np.ravel_multi_index(coords.T, dims)
    order = np.argsort(keys, kind="stable")
    ncells = int(np.prod(dims))
    cell_start = np.searchsorted(keys[order], np.arange(ncells + 1))
    offsets = grid_offsets(d)

    src_parts, dst_parts = [], []
    for b0 in range(0, n, block):
        idx = np.arange(b0, min(n, b0 + block))
        for off in offsets:
            nc = coords[idx] + off
            ok = np.all((nc >= 0) & (nc < dims), axis=1)
            if not np.any(ok):
                continue
            ii = idx[ok]
            nkey = np.ravel_multi_index(nc[ok].T, dims)
            start = cell_start[nkey]
            counts = cell_start[nkey + 1] - start
            total = int(counts.sum())
            if total == 0:
                continue
            rep_i = np.repeat(ii, counts)
            base = np.repeat(np.cumsum(counts) - counts, counts)
            pos = np.arange(total) - base + np.repeat(start, counts)
            jj = order[pos]
            dist = _pnorm_rows(points[rep_i] - points[jj], p_code)
            keep = (dist <= radii[rep_i]) & (rep_i != jj)
            src_parts.append(rep_i[keep])
            dst_parts.append(jj[keep])
    if src_parts:
        src = np.concatenate(src_parts)
        dst = np.concatenate(dst_parts)
    else:
        src = dst = np.zeros(0, dtype=np.int64)
    sort = np.lexsort((dst, src))
    src, dst = src[sort], dst[sort]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
    return indptr, dst.astype(np.int64)


def count_components(n, src, dst):
    """Number of connected components (vectorised hook-and-jump union-find)."""
    if n == 0:
        return 0
    parent = np.arange(n, dtype=np.int64)
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    while True:
        pu, pv = parent[src], parent[dst]
        hi = np.maximum(pu, pv)
        lo = np.minimum(pu, pv)
        changed = hi != lo
        if not np.any(changed):
            break
        np.minimum.at(parent, hi[changed], lo[changed])
        while True:
            nxt = parent[parent]
            if np.array_equal(nxt, parent):
                break
            parent = nxt
    return int(np.count_nonzero(parent == np.arange(n)))
