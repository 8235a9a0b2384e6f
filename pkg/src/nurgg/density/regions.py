"""Masses of the regions A_n(x), Â_n(x), K_n(x, y) and the numeric check of
the two sufficient conditions for the Poisson limit of isolated-node counts.

Region memberships depend on the cut-off radius at the integration point,
so integration is randomised quasi-Monte Carlo over a bounding box with the
radius solved at every sample point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .measure import (
    DEFAULT_BUDGET,
    IntegrationError,
    ball_measure,
    poisson_cutoff_mass,
    radii_for_mass,
    sphere_directions,
)
from .models import DensityModel, _as_points
from .norms import NormSpec

REGION_KINDS = ("A", "A_hat", "K", "ball2")


@dataclass(frozen=True)
class RegionProbe:
    """Which region to measure: A_n(x), Â_n(x), K_n(x, y) or B(x, 2 r̂_n(x))."""

    kind: str
    x: tuple
    n: float
    beta: float = 0.0
    y: tuple | None = None

    def __post_init__(self):
        if self.kind not in REGION_KINDS:
            raise ValueError(f"region kind must be one of {REGION_KINDS}")
        if self.kind == "K" and self.y is None:
            raise ValueError("K_n(x, y) needs a second point y")


@dataclass(frozen=True)
class RegionEstimate:
    value: float
    std_error: float
    points: int


def _qmc_batches(d, points, scrambles, seed):
    per = max(1 << int(math.ceil(math.log2(max(points // scrambles, 2)))), 2)
    return [qmc.Sobol(d, scramble=True, seed=seed + k).random(per) for k in range(scrambles)]


def _clip_box(density, lo, hi):
    return np.maximum(lo, density.lower), np.minimum(hi, density.upper)


def global_radius_bound(density, norm, n, beta, *, samples=1024, seed=7, budget=DEFAULT_BUDGET):
    """Largest cut-off radius seen on a Sobol cover of the support (with 10% slack)."""
    u = qmc.Sobol(density.dim, scramble=True, seed=seed).random(samples)
    pts = density.lower + (density.upper - density.lower) * u
    pts = pts[density.pdf(pts) > 0]
    target = poisson_cutoff_mass(beta, n)
    r = radii_for_mass(density, norm, pts, target, budget=budget)
    return 1.1 * float(r.max())


def in_A(density, norm, x, ys, n, beta, *, r_x=None, r_y=None, hat=False, budget=DEFAULT_BUDGET):
    """Membership of points ys in A_n(x) (or Â_n(x) with ``hat=True``)."""
    x = np.asarray(x, dtype=float)
    ys = _as_points(ys, density.dim)
    target = poisson_cutoff_mass(beta, n)
    if r_x is None:
        r_x = radii_for_mass(density, norm, x[None, :], target, budget=budget)[0]
    if r_y is None:
        r_y = np.full(len(ys), np.nan)
        ok = density.pdf(ys) > 0
        if np.any(ok):
            r_y[ok] = radii_for_mass(density, norm, ys[ok], target, budget=budget)
    dist = norm.distance(ys, x)
    with np.errstate(invalid="ignore"):
        member = dist <= r_x + r_y
        if hat:
            member &= np.maximum(r_x, r_y) <= dist
    return np.where(np.isnan(r_y), False, member)


def _intersection_mass(density, norm, x, rx, y, ry, batches):
    """F(B(y, ry) ∩ B(x, rx)) for arrays of pairs; returns (mean, se) arrays."""
    d = density.dim
    est = np.zeros((len(batches), len(x)))
    for b, u in enumerate(batches):
        lo = y - ry[:, None]
        hi = y + ry[:, None]
        lo, hi = _clip_box(density, lo, hi)
        vol = np.prod(np.clip(hi - lo, 0.0, None), axis=1)
        pts = lo[:, None, :] + (hi - lo)[:, None, :] * u[None, :, :]
        flat = pts.reshape(-1, d)
        w = density.pdf(flat).reshape(len(x), len(u))
        w *= norm.distance(pts, y[:, None, :]) < ry[:, None]
        w *= norm.distance(pts, x[:, None, :]) < rx[:, None]
        est[b] = vol * w.mean(axis=1)
    se = est.std(axis=0, ddof=1) / math.sqrt(len(batches)) if len(batches) > 1 else np.zeros(len(x))
    return est.mean(axis=0), se


def region_measure(density: DensityModel, norm: NormSpec, probe: RegionProbe, *, points=4096, scrambles=8,
                   rel_tol=0.05, seed=2024, budget=DEFAULT_BUDGET, return_estimate=False):
    """F of the region described by ``probe``.

    The tolerance is relative to the cut-off mass (log n + beta)/n, the
    natural unit for every region here; exceeding it raises IntegrationError.
    """
    target = poisson_cutoff_mass(probe.beta, probe.n)
    x = np.asarray(probe.x, dtype=float)
    r_x = radii_for_mass(density, norm, x[None, :], target, budget=budget)[0]

    if probe.kind == "ball2":
        val = ball_measure(density, norm, x, 2.0 * r_x, budget=budget)
        est = RegionEstimate(val, 0.0, 0)
        return est if return_estimate else est.value

    batches = _qmc_batches(density.dim, points, scrambles, seed)
    if probe.kind == "K":
        y = np.asarray(probe.y, dtype=float)
        if np.array_equal(x, y):
            est = RegionEstimate(0.0, 0.0, 0)
            return est if return_estimate else 0.0
        r_y = radii_for_mass(density, norm, y[None, :], target, budget=budget)[0]
        inter, se = _intersection_mass(density, norm, x[None, :], np.array([r_x]), y[None, :], np.array([r_y]), batches)
        value = max(target - float(inter[0]), 0.0)
        se = float(se[0])
    else:
        reach = r_x + global_radius_bound(density, norm, probe.n, probe.beta, budget=budget)
        # pilot pass over the wide box, then shrink to the members actually seen
        lo, hi = _clip_box(density, x - reach, x + reach)
        pilot = lo + (hi - lo) * qmc.Sobol(density.dim, scramble=True, seed=seed - 1).random(4 * len(batches[0]))
        seen = in_A(density, norm, x, pilot, probe.n, probe.beta, r_x=r_x, budget=budget)
        if np.any(seen):
            far = float(np.max(np.abs(pilot[seen] - x)))
            cell = float(np.max(hi - lo)) / len(pilot) ** (1.0 / density.dim)
            reach = min(reach, 1.25 * far + 2.0 * cell)
        lo, hi = _clip_box(density, x - reach, x + reach)
        vol = float(np.prod(np.clip(hi - lo, 0.0, None)))
        ests = []
        for u in batches:
            ys = lo + (hi - lo) * u
            member = in_A(density, norm, x, ys, probe.n, probe.beta, r_x=r_x, hat=probe.kind == "A_hat",
                          budget=budget)
            ests.append(vol * float(np.mean(density.pdf(ys) * member)))
        ests = np.array(ests)
        value = float(ests.mean())
        se = float(ests.std(ddof=1) / math.sqrt(len(ests))) if len(ests) > 1 else 0.0
    if se > rel_tol * target:
        raise IntegrationError(
            f"region {probe.kind} estimate {value:.4g} has standard error {se:.2e} above {rel_tol:.0%} of {target:.3g}",
            achieved_error=se,
        )
    est = RegionEstimate(value, se, sum(len(u) for u in batches))
    return est if return_estimate else est.value


@dataclass
class ConditionRow:
    n: float
    target: float
    inf_k_ratio: float
    inf_k_at: tuple
    sup_ball_ratio: float
    sup_ball_at: tuple
    pairs_checked: int


@dataclass
class PoissonConditionReport:
    alpha: float
    beta: float
    rows: list[ConditionRow] = field(default_factory=list)
    note: str = (
        "Heuristic check on finite grids: condition (a) is an infimum and (b) a rate "
        "over all of the support as n grows; passing here is evidence, not a proof."
    )

    @property
    def k_condition_holds(self) -> bool:
        return all(r.inf_k_ratio >= self.alpha for r in self.rows)

    @property
    def ball_condition_decreasing(self) -> bool:
        vals = [r.sup_ball_ratio for r in self.rows]
        return all(b < a for a, b in zip(vals, vals[1:]))

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "k_condition_holds": self.k_condition_holds,
            "ball_condition_decreasing": self.ball_condition_decreasing,
            "note": self.note,
            "rows": [r.__dict__ for r in self.rows],
        }

    def summary(self) -> str:
        lines = [
            f"alpha={self.alpha:g} beta={self.beta:g}",
            f"{'n':>10} {'inf F(K)/t':>12} {'sup F(B2)n^(1-a)':>18}",
        ]
        for r in self.rows:
            lines.append(f"{r.n:>10.4g} {r.inf_k_ratio:>12.4f} {r.sup_ball_ratio:>18.4f}")
        lines.append(f"condition (a) inf >= alpha on grid: {self.k_condition_holds}")
        lines.append(f"condition (b) decreasing in n: {self.ball_condition_decreasing}")
        lines.append(self.note)
        return "\n".join(lines)


def support_grid(density: DensityModel, grid_size: int) -> np.ndarray:
    """Cell-centred grid over the support box, restricted to where f > 0."""
    axes = [
        density.lower[k] + (density.upper[k] - density.lower[k]) * (np.arange(grid_size) + 0.5) / grid_size
        for k in range(density.dim)
    ]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, density.dim)
    return pts[density.pdf(pts) > 0]


def verify_poisson_conditions(density: DensityModel, norm: NormSpec, alpha: float, beta: float, n_list,
                              grid_size: int, *, directions: int = 8, steps: int = 4, points: int = 2048,
                              budget=DEFAULT_BUDGET, seed: int = 99) -> PoissonConditionReport:
    """Grid check of  inf F(K_n(x,y)) n/(log n + beta) >= alpha  and of the decay
    of  sup F(B(x, 2 r̂_n(x))) n^(1 - alpha)  along ``n_list``."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    n_list = list(n_list)
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n_list must be increasing")
    if grid_size < 1:
        raise ValueError("grid_size must be >= 1")
    xs = support_grid(density, grid_size)
    if len(xs) == 0:
        raise ValueError("grid misses the support; increase grid_size")
    u = sphere_directions(density.dim, directions)
    u = u / norm.direction_scale(u)[:, None]  # unit length in the chosen norm
    batches = _qmc_batches(density.dim, points, 4, seed)
    report = PoissonConditionReport(alpha=alpha, beta=beta)
    for n in n_list:
        target = poisson_cutoff_mass(beta, n)
        r_x = radii_for_mass(density, norm, xs, target, budget=budget)
        r_sup = global_radius_bound(density, norm, n, beta, budget=budget)

        # candidate y along rays; keep those in Â_n(x) and inside the support
        frac = (np.arange(steps) + 0.5) / steps
        dist = r_x[:, None, None] + r_sup * frac[None, None, :]
        ys = xs[:, None, None, :] + dist[..., None] * u[None, :, None, :]
        ys = ys.reshape(-1, density.dim)
        owner = np.repeat(np.arange(len(xs)), len(u) * steps)
        ok = density.pdf(ys) > 0
        ys, owner = ys[ok], owner[ok]
        r_y = radii_for_mass(density, norm, ys, target, budget=budget)
        dxy = norm.distance(ys, xs[owner])
        hat = (np.maximum(r_x[owner], r_y) <= dxy) & (dxy <= r_x[owner] + r_y)
        ys, owner, r_y = ys[hat], owner[hat], r_y[hat]

        inf_ratio, inf_at = math.inf, None
        for start in range(0, len(ys), 256):
            sl = slice(start, start + 256)
            inter, _ = _intersection_mass(density, norm, xs[owner[sl]], r_x[owner[sl]], ys[sl], r_y[sl], batches)
            ratio = (target - inter) / target
            j = int(np.argmin(ratio))
            if ratio[j] < inf_ratio:
                inf_ratio = float(ratio[j])
                inf_at = (tuple(xs[owner[sl]][j]), tuple(ys[sl][j]))

        b = ball_measure(density, norm, xs, 2.0 * r_x, budget=budget) * n ** (1.0 - alpha)
        jb = int(np.argmax(b))
        report.rows.append(
            ConditionRow(
                n=float(n),
                target=target,
                inf_k_ratio=inf_ratio,
                inf_k_at=inf_at,
                sup_ball_ratio=float(b[jb]),
                sup_ball_at=tuple(xs[jb]),
                pairs_checked=int(len(ys)),
            )
        )
    return report
