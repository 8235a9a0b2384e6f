"""Per-realisation statistics: isolated-node counts, exact critical cut-off
levels, degree extremes, the function H(a) = 1 - a + a log a with its two
inverse branches, and distances to a Poisson law."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps
from scipy.spatial import cKDTree

from .density.measure import DEFAULT_BUDGET, DEFAULT_TOLERANCES, BallMassEvaluator, cutoff_radii, radii_for_mass
from .density.models import DensityModel
from .density.norms import NormSpec
from .graph import DirectedGeoGraph, EnhancedGraph, build_digraph, enhance
from .sampling import PointSample

UNATTAINABLE = "unattainable"


def count_zero_outdegree(g: DirectedGeoGraph) -> int:
    return int(np.count_nonzero(g.out_degrees == 0))


def count_isolated(g: EnhancedGraph) -> int:
    return int(np.count_nonzero(g.degrees == 0))


@dataclass(frozen=True)
class DegreeSummary:
    out_degrees: np.ndarray
    Delta_n: int
    delta_n: int
    mean: float
    W_n: int
    n: float | None = None
    level: float | None = None

    @classmethod
    def of(cls, g: DirectedGeoGraph, n=None, level=None) -> "DegreeSummary":
        deg = g.out_degrees
        if len(deg) == 0:
            return cls(deg, 0, 0, 0.0, 0, n, level)
        return cls(deg, int(deg.max()), int(deg.min()), float(deg.mean()), int(np.count_nonzero(deg == 0)), n, level)


# --------------------------------------------------------------------------
# nearest-neighbour masses


def _tree_p(norm: NormSpec) -> float:
    return np.inf if norm.p == math.inf else norm.p


def nearest_neighbor_distances(points, norm: NormSpec) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if len(pts) < 2:
        return np.full(len(pts), np.inf)
    dist, _ = cKDTree(pts).query(pts, k=2, p=_tree_p(norm))
    return dist[:, 1]


def nearest_neighbor_masses(points, density: DensityModel, norm: NormSpec, *, budget=DEFAULT_BUDGET) -> np.ndarray:
    """a_i = F(B(X_i, D_i)), D_i the distance from X_i to its nearest other point.

    Vertex i has an out-edge at target mass t exactly when t > a_i (and at
    t = a_i unless the ball mass is flat just below D_i), so isolated counts
    and critical levels follow from these masses alone.
    """
    pts = np.asarray(points, dtype=float)
    if len(pts) < 2:
        return np.full(len(pts), np.inf)
    D = nearest_neighbor_distances(pts, norm)
    return BallMassEvaluator(density, norm, pts, budget)(D)


def zero_outdegree_from_masses(masses, target: float) -> int:
    """#{i : a_i > target}, the number of vertices without out-edges."""
    return int(np.count_nonzero(np.asarray(masses) > target))


# --------------------------------------------------------------------------
# critical cut-off levels


@dataclass(frozen=True)
class CutoffResult:
    """Critical parameters; ``None`` marks a realisation with fewer than two
    points, for which no level removes every isolated vertex."""

    d_n: float | None
    d_tilde_n: float | None
    levels: np.ndarray
    enhanced_levels: np.ndarray | None = None

    @property
    def attainable(self) -> bool:
        return self.d_n is not None


def _scale(n: float) -> float:
    if n <= 1:
        raise ValueError("intensity n must exceed 1")
    return n / math.log(n)


def _sample_parts(sample, n):
    if isinstance(sample, PointSample):
        return sample.points, sample.n if n is None else n
    if n is None:
        raise ValueError("pass the intensity n with a raw point array")
    return np.asarray(sample, dtype=float), n


def critical_cutoff(sample, density: DensityModel, norm: NormSpec, n: float | None = None, *,
                    budget=DEFAULT_BUDGET) -> CutoffResult:
    """d_n = (n / log n) max_i a_i, with a_i the nearest-neighbour ball masses."""
    pts, n = _sample_parts(sample, n)
    if len(pts) < 2:
        return CutoffResult(None, None, np.full(len(pts), np.inf))
    levels = _scale(n) * nearest_neighbor_masses(pts, density, norm, budget=budget)
    return CutoffResult(float(levels.max()), None, levels)


def critical_cutoff_enhanced(sample, density: DensityModel, norm: NormSpec, n: float | None = None, *,
                             budget=DEFAULT_BUDGET, tolerances=DEFAULT_TOLERANCES) -> CutoffResult:
    """Both d_n and its analogue for the symmetrised graph.

    Vertex i stops being isolated at level c once c log n / n reaches
    e_i = min(a_i, min_j F(B(X_j, ||X_i - X_j||))).  Only j whose ball at the
    largest a_i already contains X_i can lower e_i below a_i, so candidates
    come from one digraph built at that mass.
    """
    pts, n = _sample_parts(sample, n)
    N = len(pts)
    if N < 2:
        return CutoffResult(None, None, np.full(N, np.inf), np.full(N, np.inf))
    ev = BallMassEvaluator(density, norm, pts, budget)
    a = ev(nearest_neighbor_distances(pts, norm))
    t_max = float(a.max())
    e = a.copy()
    if t_max > 0:
        R = radii_for_mass(density, norm, pts, t_max, tolerances=tolerances, budget=budget)
        g = build_digraph(pts, R * (1.0 + 1e-9), norm)
        src, dst = g.edges()
        if len(src):
            dist = norm.distance(pts[src], pts[dst])
            cand = ev(dist, src)
            np.minimum.at(e, dst, cand)
    s = _scale(n)
    return CutoffResult(float(s * a.max()), float(s * e.max()), s * a, s * e)


def _digraph_at(pts, density, norm, n, c, tolerances, budget):
    r = cutoff_radii(density, norm, pts, c, n, tolerances=tolerances, budget=budget)
    return build_digraph(pts, r, norm)


def _bisect_level(n, isolated, rel_tol):
    c_cap = _scale(n)  # c log n / n <= 1
    lo, hi = 0.0, min(1.0, c_cap)
    while isolated(hi):
        lo = hi
        if hi >= c_cap:
            return None
        hi = min(2.0 * hi, c_cap)
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if isolated(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def critical_cutoff_bisection(sample, density, norm, n=None, *, rel_tol=1e-9, enhanced=False,
                              tolerances=DEFAULT_TOLERANCES, budget=DEFAULT_BUDGET) -> float | None:
    """Reference value of d_n (or of the enhanced level): bisection over c,
    rebuilding radii and graph from scratch at every probe."""
    pts, n = _sample_parts(sample, n)
    if len(pts) < 2:
        return None

    def isolated(c):
        g = _digraph_at(pts, density, norm, n, c, tolerances, budget)
        if enhanced:
            return count_isolated(enhance(g)) > 0
        return count_zero_outdegree(g) > 0

    return _bisect_level(n, isolated, rel_tol)


# --------------------------------------------------------------------------
# H and degree bounds


def entropy_H(a: float) -> float:
    if a < 0:
        raise ValueError("H is defined for a >= 0")
    if a == 0:
        return 1.0
    return 1.0 - a + a * math.log(a)


def H_inverse(y: float, branch: str = "plus", tol: float = 1e-10) -> float:
    """Solve H(a) = y on [1, inf) (``plus``) or on [0, 1] (``minus``)."""
    if branch not in ("plus", "minus"):
        raise ValueError("branch must be 'plus' or 'minus'")
    if y < 0 or (branch == "minus" and y > 1):
        raise ValueError(f"y={y} outside the range of the {branch} branch")
    if y == 0:
        return 1.0
    if branch == "minus":
        if y == 1:
            return 0.0
        lo, hi = 0.0, 1.0  # H decreasing here
    else:
        lo, hi = 1.0, 2.0
        while entropy_H(hi) < y:
            lo, hi = hi, 2.0 * hi
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        h = entropy_H(mid)
        if abs(h - y) <= tol:
            return mid
        if (h < y) == (branch == "plus"):
            lo = mid
        else:
            hi = mid
        if hi - lo <= 4 * np.finfo(float).eps * max(hi, 1.0):
            break
    best = min((lo, hi, 0.5 * (lo + hi)), key=lambda v: abs(entropy_H(v) - y))
    return best


def degree_bounds(c: float, n: float) -> tuple[float, float | None]:
    """Asymptotic envelope for the largest and smallest out-degree at level c.

    upper = c H_+^{-1}(1/c) log n; lower = c H_-^{-1}(1/c) log n for c > 1 and
    None otherwise (below 1 the minimum degree tends to zero, at 1 nothing is
    known).
    """
    if not c > 0:
        raise ValueError("c must be positive")
    ln = math.log(n)
    upper = c * H_inverse(1.0 / c, "plus") * ln
    lower = c * H_inverse(1.0 / c, "minus") * ln if c > 1 else None
    return upper, lower


# --------------------------------------------------------------------------
# Poisson comparisons


def histogram(values) -> np.ndarray:
    v = np.asarray(values, dtype=np.int64)
    if len(v) == 0:
        raise ValueError("no observations")
    if np.any(v < 0):
        raise ValueError("counts must be nonnegative")
    return np.bincount(v)


def tv_distance_to_poisson(counts, lam: float) -> float:
    """Total variation distance between an empirical law, given as a
    histogram (counts[k] = number of observations equal to k), and Po(lam).
    Poisson mass beyond the largest observed k is lumped into one term."""
    h = np.asarray(counts, dtype=float)
    if h.ndim != 1 or len(h) == 0 or h.sum() <= 0:
        raise ValueError("histogram must be nonempty")
    if not lam > 0:
        raise ValueError("lambda must be positive")
    p_hat = h / h.sum()
    k = np.arange(len(h))
    pois = sps.poisson.pmf(k, lam)
    tail = sps.poisson.sf(len(h) - 1, lam)
    return float(min(1.0, 0.5 * (np.abs(p_hat - pois).sum() + tail)))


@dataclass(frozen=True)
class ChiSquareResult:
    statistic: float
    dof: int
    p_value: float
    bins: int


def chi_square_poisson(values, lam: float, min_expected: float = 5.0) -> ChiSquareResult:
    """Pearson goodness of fit of integer observations to Po(lam).

    Bins are merged from both tails until each expects at least
    ``min_expected`` observations; lam is taken as known (no dof lost).
    """
    v = np.asarray(values, dtype=np.int64)
    total = len(v)
    lo_k = int(max(0, min(v.min(), sps.poisson.ppf(1e-6, lam))))
    hi_k = int(max(v.max(), sps.poisson.isf(1e-6, lam)))
    ks = np.arange(lo_k, hi_k + 1)
    obs = np.array([np.count_nonzero(v == k) for k in ks], dtype=float)
    obs[0] += np.count_nonzero(v < lo_k)
    exp = total * sps.poisson.pmf(ks, lam)
    exp[0] += total * sps.poisson.cdf(lo_k - 1, lam)
    exp[-1] += total * sps.poisson.sf(hi_k, lam)
    # merge sparse bins into their neighbours, left tail then right tail
    bins_o, bins_e = [], []
    acc_o = acc_e = 0.0
    for o, e in zip(obs, exp):
        acc_o += o
        acc_e += e
        if acc_e >= min_expected:
            bins_o.append(acc_o)
            bins_e.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0:
        if bins_e:
            bins_o[-1] += acc_o
            bins_e[-1] += acc_e
        else:
            bins_o.append(acc_o)
            bins_e.append(acc_e)
    bo, be = np.array(bins_o), np.array(bins_e)
    stat = float(np.sum((bo - be) ** 2 / be))
    dof = max(len(bo) - 1, 1)
    return ChiSquareResult(stat, dof, float(sps.chi2.sf(stat, dof)), len(bo))


def probe_out_degree(points, x0, r0: float, norm: NormSpec) -> int:
    """Out-degree of an extra vertex placed at x0 with radius r0."""
    pts = np.asarray(points, dtype=float)
    if len(pts) == 0:
        return 0
    return int(np.count_nonzero(norm.distance(pts, np.asarray(x0, dtype=float)) <= r0))
