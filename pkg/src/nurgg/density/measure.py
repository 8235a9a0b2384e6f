"""Ball masses F(B(x, r)) and their inversion in r.

Closed forms are used where a density offers one.  Everything else goes
through ray tables: for a fixed centre the density is sampled along a fixed
set of directions on a geometric radial grid, interpolated linearly, and
integrated exactly against s^(d-1).  The resulting mass is continuous and
nondecreasing in r, so bisection on it is well posed; the error estimate is
the change when half of the directions are dropped.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm as _normal
from scipy.stats import qmc

from .models import DensityModel, ProductDensity, _as_points, sphere_area
from .norms import NormSpec


class IntegrationError(RuntimeError):
    def __init__(self, message, achieved_error=None):
        super().__init__(message)
        self.achieved_error = achieved_error


class RadiusSolveError(RuntimeError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


@dataclass(frozen=True)
class QuadratureBudget:
    """Resolution of the ray-table fallback."""

    directions: int = 128
    growth: float = 1.04
    s_min_rel: float = 1e-6
    max_error: float = 1e-3
    chunk: int = 64

    @classmethod
    def from_config(cls, cfg: dict | None) -> "QuadratureBudget":
        if not cfg:
            return cls()
        fields = {k: cfg[k] for k in ("directions", "growth", "s_min_rel", "max_error", "chunk") if k in cfg}
        return cls(**fields)


@dataclass(frozen=True)
class SolverTolerances:
    """Relative mass tolerances for radius inversion."""

    closed_form: float = 1e-8
    quadrature: float = 1e-5

    @classmethod
    def from_config(cls, cfg: dict | None) -> "SolverTolerances":
        if not cfg:
            return cls()
        return cls(**{k: float(cfg[k]) for k in ("closed_form", "quadrature") if k in cfg})


DEFAULT_BUDGET = QuadratureBudget()
DEFAULT_TOLERANCES = SolverTolerances()

_DIRECTION_CACHE: dict = {}


def sphere_directions(d: int, m: int) -> np.ndarray:
    """m unit vectors spread evenly over S^(d-1); every other one is again even."""
    key = (d, m)
    if key in _DIRECTION_CACHE:
        return _DIRECTION_CACHE[key]
    if d == 1:
        u = np.array([[1.0], [-1.0]])
    elif d == 2:
        ang = (np.arange(m) + 0.5) * 2.0 * math.pi / m
        u = np.column_stack([np.cos(ang), np.sin(ang)])
    else:
        m2 = 1 << max(1, int(math.ceil(math.log2(m))))
        pts = qmc.Sobol(d, scramble=True, seed=12345).random(m2)
        g = _normal.ppf(np.clip(pts, 1e-12, 1 - 1e-12))
        g = g / np.linalg.norm(g, axis=1, keepdims=True)
        # the leading half of a Sobol sequence is balanced; put it on the even slots
        u = np.empty_like(g)
        u[0::2] = g[: m2 // 2]
        u[1::2] = g[m2 // 2 :]
    _DIRECTION_CACHE[key] = u
    return u


def direction_rule(d: int, m: int):
    """Directions and two sets of angular weights (main rule, coarser rule).

    In the plane the circle is cut into eight 45-degree sectors, so the
    corners of l1 and l_inf balls fall on sector ends, and each sector gets
    Gauss-Legendre rules with m/8 and m/16 nodes.  In higher dimensions the
    main rule is the equal-weight Sobol set and the coarse rule its even
    half.  The difference between the two rules is the error estimate.
    """
    area = sphere_area(d)
    if d == 1:
        u = np.array([[1.0], [-1.0]])
        w = np.ones(2)
        return u, w, w
    if d == 2:
        q_hi = max(2, m // 8)
        q_lo = max(1, q_hi // 2)
        angles, w_hi, w_lo = [], [], []
        for q, is_hi in ((q_hi, True), (q_lo, False)):
            x, w = np.polynomial.legendre.leggauss(q)
            for j in range(8):
                a0 = j * math.pi / 4
                angles.append(a0 + (x + 1.0) * math.pi / 8)
                ww = w * math.pi / 8
                w_hi.append(ww if is_hi else np.zeros(q))
                w_lo.append(np.zeros(q) if is_hi else ww)
        ang = np.concatenate(angles)
        u = np.column_stack([np.cos(ang), np.sin(ang)])
        return u, np.concatenate(w_hi), np.concatenate(w_lo)
    u = sphere_directions(d, m)
    w_hi = np.full(len(u), area / len(u))
    w_lo = np.zeros(len(u))
    w_lo[::2] = 2.0 * area / len(u)
    return u, w_hi, w_lo


class RayTables:
    """Cumulative radial integrals of f along fixed rays from each centre."""

    def __init__(self, density: DensityModel, norm: NormSpec, centers, budget: QuadratureBudget = DEFAULT_BUDGET):
        self.centers = _as_points(centers, density.dim)
        d = density.dim
        self.d = d
        u, self.w_hi, self.w_lo = direction_rule(d, budget.directions)
        self.dirs = u
        self.scale = norm.direction_scale(u)
        lo, hi = density.lower, density.upper
        far = np.max(np.linalg.norm(np.maximum(np.abs(self.centers - lo), np.abs(self.centers - hi)), axis=1))
        # grid depends on the centres only when they leave the support box
        s_max = max(float(far), density.diameter) * (1.0 + 1e-9) + 1e-12
        s_min = budget.s_min_rel * max(density.diameter, 1e-12)
        k = int(math.ceil(math.log(max(s_max / s_min, 1.0 + 1e-12)) / math.log(budget.growth))) + 1
        s = np.concatenate([[0.0], s_min * budget.growth ** np.arange(k + 1)])
        s[-1] = max(s[-1], s_max)
        self.s = s
        c, m, ks = len(self.centers), len(u), len(s)
        # each ray's grid is clipped at the support edge so a jump there is exact
        t_exit = density.support_exit(self.centers, u)
        self.t_exit = t_exit
        grid = np.minimum(s[None, None, :], t_exit[..., None])
        inside = grid * (1.0 - 1e-12)
        pts = self.centers[:, None, None, :] + inside[..., None] * u[None, :, None, :]
        phi = density.pdf(pts.reshape(-1, d)).reshape(c, m, ks)
        self.phi = phi
        self.grid = grid
        a, b = grid[..., :-1], grid[..., 1:]
        width = b - a
        with np.errstate(divide="ignore", invalid="ignore"):
            slope = np.where(width > 0, (phi[..., 1:] - phi[..., :-1]) / width, 0.0)
        inter = phi[..., :-1] - slope * a
        cell = inter * (b**d - a**d) / d + slope * (b ** (d + 1) - a ** (d + 1)) / (d + 1)
        self.cum = np.concatenate([np.zeros((c, m, 1)), np.cumsum(cell, axis=-1)], axis=-1)

    def _ray_integrals(self, r, rows):
        s = self.s
        d = self.d
        big_r = np.minimum(r[:, None] / self.scale[None, :], self.t_exit[rows])
        big_r = np.minimum(big_r, s[-1])
        k = np.clip(np.searchsorted(s, big_r, side="right") - 1, 0, len(s) - 2)
        phi = self.phi[rows]
        grid = self.grid[rows]
        kk = k[..., None]
        pk = np.take_along_axis(phi, kk, axis=-1)[..., 0]
        pk1 = np.take_along_axis(phi, kk + 1, axis=-1)[..., 0]
        a = np.take_along_axis(grid, kk, axis=-1)[..., 0]
        b = np.take_along_axis(grid, kk + 1, axis=-1)[..., 0]
        width = b - a
        with np.errstate(divide="ignore", invalid="ignore"):
            slope = np.where(width > 0, (pk1 - pk) / width, 0.0)
        inter = pk - slope * a
        top = np.clip(big_r, a, None)
        part = inter * (top**d - a**d) / d + slope * (top ** (d + 1) - a ** (d + 1)) / (d + 1)
        return np.take_along_axis(self.cum[rows], kk, axis=-1)[..., 0] + part

    def mass(self, r, rows=None):
        """Return (mass, error estimate) for radius r at each selected centre."""
        rows = np.arange(len(self.centers)) if rows is None else np.asarray(rows)
        r = np.broadcast_to(np.asarray(r, dtype=float), rows.shape)
        g = self._ray_integrals(r, rows)
        full = g @ self.w_hi
        err = np.abs(full - g @ self.w_lo)
        return full, err


def has_closed_form(density: DensityModel, norm: NormSpec) -> bool:
    """True when every ball mass for this (density, norm) pair is closed form."""
    probe = density.closed_ball_mass(norm, (density.lower + density.upper)[None, :] / 2, np.array([density.diameter]))
    return bool(np.all(np.isfinite(probe)))


class BallMassEvaluator:
    """F(B(x_i, r)) for a fixed set of centres, mixing closed form and ray tables."""

    def __init__(self, density, norm, centers, budget=DEFAULT_BUDGET):
        self.density = density
        self.norm = norm
        self.centers = _as_points(centers, density.dim)
        self.budget = budget
        self._tables = []
        self._row_of = None
        self._tab_of = None
        self.last_error = np.zeros(len(self.centers))
        self.used_quadrature = np.zeros(len(self.centers), dtype=bool)

    def _ensure_tables(self, idx):
        if self._row_of is None:
            self._row_of = np.full(len(self.centers), -1)
            self._tab_of = np.full(len(self.centers), -1)
        missing = np.unique(idx[self._row_of[idx] < 0])
        if len(missing) == 0:
            return
        step = max(1, self.budget.chunk)
        for a in range(0, len(missing), step):
            part = missing[a: a + step]
            self._tables.append(RayTables(self.density, self.norm, self.centers[part], self.budget))
            self._tab_of[part] = len(self._tables) - 1
            self._row_of[part] = np.arange(len(part))

    def __call__(self, r, idx=None):
        idx = np.arange(len(self.centers)) if idx is None else np.asarray(idx)
        r = np.broadcast_to(np.asarray(r, dtype=float), idx.shape).copy()
        out = self.density.closed_ball_mass(self.norm, self.centers[idx], r)
        out = np.array(out, dtype=float)
        err = np.zeros_like(out)
        need = np.flatnonzero(~np.isfinite(out))
        if len(need):
            sub = idx[need]
            self._ensure_tables(sub)
            for t in np.unique(self._tab_of[sub]):
                sel = self._tab_of[sub] == t
                val, e = self._tables[t].mass(r[need[sel]], self._row_of[sub[sel]])
                out[need[sel]] = val
                err[need[sel]] = e
            self.used_quadrature[sub] = True
        self.last_error[idx] = err
        return np.clip(out, 0.0, None)


def ball_measure(density: DensityModel, norm: NormSpec, x, r, *, budget=DEFAULT_BUDGET, return_error=False):
    """F(B(x, r)) for a single centre x (float), or for a stack of centres."""
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    pts = _as_points(arr, density.dim)
    r_arr = np.broadcast_to(np.asarray(r, dtype=float), (len(pts),))
    if np.any(r_arr < 0):
        raise ValueError("radius must be >= 0")
    ev = BallMassEvaluator(density, norm, pts, budget)
    val = ev(r_arr)
    err = ev.last_error
    if np.any(err > budget.max_error):
        raise IntegrationError(
            f"ball mass quadrature error {err.max():.3e} exceeds {budget.max_error:.1e}",
            achieved_error=float(err.max()),
        )
    if single:
        return (float(val[0]), float(err[0])) if return_error else float(val[0])
    return (val, err) if return_error else val


def _reach_radius(density, norm, x):
    """Radius beyond which B(x, r) covers the support box."""
    corners = np.maximum(np.abs(x - density.lower), np.abs(x - density.upper))
    return norm.norm(corners) * (1.0 + 1e-12) + 1e-15


def _solve_chunk(ev, density, norm, x, targets, tols):
    m = len(x)
    idx = np.arange(m)
    rmax = _reach_radius(density, norm, x)
    f0 = density.pdf(x)
    guess = np.where(
        f0 > 0,
        (targets / (np.where(f0 > 0, f0, 1.0) * norm.theta_d)) ** (1.0 / density.dim),
        1e-3 * density.diameter,
    )
    hi = np.minimum(np.maximum(guess, 1e-300), rmax)
    lo = np.zeros(m)
    slack = 1e-14 * np.maximum(targets, 1.0)
    f_hi = ev(hi, idx)
    for _ in range(2000):
        short = (f_hi < targets - slack) & (hi < rmax)
        if not np.any(short):
            break
        lo[short] = hi[short]
        hi[short] = np.minimum(2.0 * hi[short], rmax[short])
        f_hi[short] = ev(hi[short], idx[short])
    bad = f_hi < targets - np.maximum(tols, slack)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise RadiusSolveError(
            f"target mass {targets[i]:.6g} exceeds reachable mass {f_hi[i]:.6g}", index=i
        )
    for _ in range(200):
        active = (hi - lo) > 1e-14 * hi + 1e-300
        if not np.any(active):
            break
        mid = 0.5 * (lo[active] + hi[active])
        fm = ev(mid, idx[active])
        up = fm >= targets[active] - slack[active]
        a_idx = np.flatnonzero(active)
        hi[a_idx[up]] = mid[up]
        lo[a_idx[~up]] = mid[~up]
    resid = np.abs(ev(hi, idx) - targets)
    bad = resid > np.maximum(tols, slack)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise RadiusSolveError(
            f"radius solve residual {resid[i]:.3e} exceeds tolerance {tols[i]:.3e}", index=i
        )
    return hi, resid


def radii_for_mass(density, norm, x, targets, *, tol=None, tolerances=DEFAULT_TOLERANCES,
                   budget=DEFAULT_BUDGET, return_residual=False):
    """Smallest r_i with F(B(x_i, r_i)) = target_i, for a stack of centres.

    ``tol`` is an absolute mass tolerance; by default it is the relative
    closed-form or quadrature tolerance times the target.
    """
    pts = _as_points(x, density.dim)
    targets = np.broadcast_to(np.asarray(targets, dtype=float), (len(pts),)).copy()
    if np.any(targets <= 0) or np.any(targets > 1 + 1e-12):
        raise ValueError("target masses must lie in (0, 1]")
    closed = has_closed_form(density, norm)
    rel = tolerances.closed_form if closed else tolerances.quadrature
    tols = np.full(len(pts), float(tol)) if tol is not None else rel * targets
    chunk = len(pts) if closed else budget.chunk
    radii = np.empty(len(pts))
    resid = np.empty(len(pts))
    for start in range(0, len(pts), max(chunk, 1)):
        sl = slice(start, start + chunk)
        ev = BallMassEvaluator(density, norm, pts[sl], budget)
        try:
            radii[sl], resid[sl] = _solve_chunk(ev, density, norm, pts[sl], targets[sl], tols[sl])
        except RadiusSolveError as exc:
            raise RadiusSolveError(str(exc), index=None if exc.index is None else start + exc.index) from None
    return (radii, resid) if return_residual else radii


def radius_for_mass(density, norm, x, target, tol=None, **kwargs) -> float:
    """Smallest r with F(B(x, r)) = target (single centre)."""
    return float(radii_for_mass(density, norm, np.asarray(x, float)[None, :], [target], tol=tol, **kwargs)[0])


def cutoff_mass(c: float, n: float) -> float:
    if n <= 1:
        raise ValueError("intensity n must exceed 1")
    if c <= 0:
        raise ValueError("c must be positive")
    t = c * math.log(n) / n
    if t > 1:
        raise ValueError(f"c log n / n = {t:.4g} exceeds 1")
    return t


def poisson_cutoff_mass(beta: float, n: float) -> float:
    if n <= 0:
        raise ValueError("intensity n must be positive")
    num = math.log(n) + beta
    if num <= 0:
        raise ValueError(f"log n + beta = {num:.4g} must be positive")
    t = num / n
    if t > 1:
        raise ValueError(f"(log n + beta) / n = {t:.4g} exceeds 1")
    return t


def cutoff_radius(density, norm, x, c, n, **kwargs) -> float:
    """r_n(c, x): the radius whose ball carries mass c log n / n."""
    return radius_for_mass(density, norm, x, cutoff_mass(c, n), **kwargs)


def cutoff_radii(density, norm, x, c, n, **kwargs) -> np.ndarray:
    return radii_for_mass(density, norm, x, cutoff_mass(c, n), **kwargs)


def poisson_cutoff_radius(density, norm, x, beta, n, **kwargs) -> float:
    """The radius whose ball carries mass (log n + beta) / n."""
    return radius_for_mass(density, norm, x, poisson_cutoff_mass(beta, n), **kwargs)


def poisson_cutoff_radii(density, norm, x, beta, n, **kwargs) -> np.ndarray:
    return radii_for_mass(density, norm, x, poisson_cutoff_mass(beta, n), **kwargs)


def h_transform(density: DensityModel, x) -> np.ndarray:
    """Coordinatewise probability-integral transform of a product density."""
    if not isinstance(density, ProductDensity):
        raise TypeError(f"h-transform needs a product density, got {density.kind}")
    arr = np.asarray(x, dtype=float)
    out = density.cdf_coords(arr)
    return out[0] if arr.ndim == 1 else out
