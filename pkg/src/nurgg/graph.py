"""Directed geometric graphs with per-vertex radii, their symmetrisation,
the broadcast-radius variant and the product-density connectivity radii."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .density.measure import (
    DEFAULT_BUDGET,
    DEFAULT_TOLERANCES,
    cutoff_radii,
    poisson_cutoff_radii,
)
from .density.models import DensityModel, ProductDensity, _as_points
from .density.norms import NormSpec
from .sampling import PointSample


@dataclass(frozen=True)
class FixedC:
    c: float

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("c must be positive")


@dataclass(frozen=True)
class FixedBeta:
    beta: float


@dataclass(frozen=True)
class Connectivity:
    epsilon: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")


def mode_from_dict(cfg: dict):
    kind = cfg.get("kind")
    if kind == "fixed_c":
        return FixedC(float(cfg["c"]))
    if kind == "fixed_beta":
        return FixedBeta(float(cfg["beta"]))
    if kind == "connectivity":
        return Connectivity(float(cfg["epsilon"]))
    raise ValueError(f"unknown radius mode {kind!r}")


@dataclass(frozen=True)
class RadiusAssignment:
    radii: np.ndarray
    mode: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        r = np.ascontiguousarray(self.radii, dtype=float)
        if r.ndim != 1 or np.any(~(r >= 0)):
            raise ValueError("radii must be a 1-D array of nonnegative numbers")
        r.setflags(write=False)
        object.__setattr__(self, "radii", r)

    def __len__(self):
        return len(self.radii)


def _points_of(sample) -> np.ndarray:
    return sample.points if isinstance(sample, PointSample) else np.asarray(sample, dtype=float)


# --------------------------------------------------------------------------
# spatial index


class GridIndex:
    """Uniform grid over the bounding box of a point set.

    The cell side is at least ``cell``; it is enlarged when the grid would
    otherwise hold more than ``max_cells_per_point * N`` cells, so tiny radii
    cannot blow up memory.
    """

    def __init__(self, points, cell: float, max_cells_per_point: float = 2.0):
        self.points = np.ascontiguousarray(points, dtype=float)
        n, d = self.points.shape
        self.origin = self.points.min(axis=0) if n else np.zeros(d)
        top = self.points.max(axis=0) if n else np.zeros(d)
        span = np.maximum(top - self.origin, 0.0)
        cell = float(cell)
        budget = max(1.0, max_cells_per_point * max(n, 1))
        cell = max(cell, 1e-12 * max(float(span.max()) if n else 0.0, 1e-300))
        while np.prod(np.floor(span / cell) + 1.0) > budget:
            cell *= 2.0
        self.cell = cell
        self.dims = (np.floor(span / cell).astype(np.int64) + 1)
        self.upper = self.origin + self.dims * cell
        coords = np.clip(np.floor((self.points - self.origin) / cell).astype(np.int64), 0, self.dims - 1)
        self.coords = coords
        keys = np.ravel_multi_index(coords.T, self.dims) if n else np.zeros(0, dtype=np.int64)
        self.order = np.argsort(keys, kind="stable")
        self.cell_start = np.searchsorted(keys[self.order], np.arange(int(np.prod(self.dims)) + 1))

    def bucket(self, key: int) -> np.ndarray:
        return self.order[self.cell_start[key]: self.cell_start[key + 1]]

    def query(self, x, rho: float) -> np.ndarray:
        """Indices of points in all cells touching the box [x - rho, x + rho]."""
        x = np.asarray(x, dtype=float)
        lo = np.clip(np.floor((x - rho - self.origin) / self.cell).astype(np.int64), 0, self.dims - 1)
        hi = np.clip(np.floor((x + rho - self.origin) / self.cell).astype(np.int64), 0, self.dims - 1)
        ranges = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
        cells = np.stack(np.meshgrid(*ranges, indexing="ij"), axis=-1).reshape(-1, len(x))
        keys = np.ravel_multi_index(cells.T, self.dims)
        parts = [self.bucket(int(k)) for k in keys]
        return np.sort(np.concatenate(parts)) if parts else np.zeros(0, dtype=np.int64)


# --------------------------------------------------------------------------
# graphs


@dataclass(frozen=True)
class DirectedGeoGraph:
    """Out-adjacency in CSR form: the out-neighbours of i are
    ``indices[indptr[i]:indptr[i + 1]]``, sorted."""

    points: np.ndarray
    radii: RadiusAssignment
    indptr: np.ndarray
    indices: np.ndarray
    norm: NormSpec

    @property
    def num_vertices(self) -> int:
        return len(self.points)

    @property
    def num_edges(self) -> int:
        return len(self.indices)

    @property
    def out_degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def out_neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]: self.indptr[i + 1]]

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        src = np.repeat(np.arange(self.num_vertices, dtype=np.int64), self.out_degrees)
        return src, self.indices

    def edge_set(self) -> set:
        s, t = self.edges()
        return set(zip(s.tolist(), t.tolist()))


@dataclass(frozen=True)
class EnhancedGraph:
    """Undirected graph; each edge is stored in both rows of the CSR arrays."""

    points: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray

    @property
    def num_vertices(self) -> int:
        return len(self.points)

    @property
    def num_edges(self) -> int:
        return len(self.indices) // 2

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]: self.indptr[i + 1]]

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Each undirected edge once, as i < j."""
        src = np.repeat(np.arange(self.num_vertices, dtype=np.int64), self.degrees)
        keep = src < self.indices
        return src[keep], self.indices[keep]

    def edge_set(self) -> set:
        s, t = self.edges()
        return set(zip(s.tolist(), t.tolist()))


def _csr(n: int, src, dst) -> tuple[np.ndarray, np.ndarray]:
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
    return indptr, np.ascontiguousarray(dst, dtype=np.int64)


def build_digraph(sample, radii, norm: NormSpec, *, max_cells_per_point: float = 2.0) -> DirectedGeoGraph:
    """Edges i -> j whenever ||X_i - X_j|| <= r_i, j != i."""
    pts = np.ascontiguousarray(_points_of(sample), dtype=float)
    assignment = radii if isinstance(radii, RadiusAssignment) else RadiusAssignment(radii, "explicit")
    r = assignment.radii
    if len(r) != len(pts):
        raise ValueError(f"{len(r)} radii for {len(pts)} points")
    if len(pts) == 0:
        return DirectedGeoGraph(pts, assignment, np.zeros(1, dtype=np.int64), np.zeros(0, dtype=np.int64), norm)
    pts = _as_points(pts, norm.d)
    grid = GridIndex(pts, float(r.max()), max_cells_per_point)
    indptr, indices = _kernels.grid_out_edges(pts, r, norm.p_code, grid.origin, grid.cell, grid.dims)
    return DirectedGeoGraph(pts, assignment, np.asarray(indptr), np.asarray(indices), norm)


def brute_force_digraph(sample, radii, norm: NormSpec, block: int = 512) -> DirectedGeoGraph:
    """All-pairs construction; the reference the grid builder is tested against."""
    pts = np.ascontiguousarray(_points_of(sample), dtype=float)
    assignment = radii if isinstance(radii, RadiusAssignment) else RadiusAssignment(radii, "explicit")
    r = assignment.radii
    n = len(pts)
    src_parts, dst_parts = [], []
    for a in range(0, n, block):
        dist = norm.distance(pts[a: a + block, None, :], pts[None, :, :])
        hit = dist <= r[a: a + block, None]
        ii, jj = np.nonzero(hit)
        ii = ii + a
        keep = ii != jj
        src_parts.append(ii[keep])
        dst_parts.append(jj[keep])
    src = np.concatenate(src_parts) if src_parts else np.zeros(0, dtype=np.int64)
    dst = np.concatenate(dst_parts) if dst_parts else np.zeros(0, dtype=np.int64)
    indptr, indices = _csr(n, src.astype(np.int64), dst.astype(np.int64))
    return DirectedGeoGraph(pts, assignment, indptr, indices, norm)


def enhance(g: DirectedGeoGraph) -> EnhancedGraph:
    s, t = g.edges()
    src = np.concatenate([s, t])
    dst = np.concatenate([t, s])
    if len(src):
        key = np.unique(src * g.num_vertices + dst)
        src, dst = key // g.num_vertices, key % g.num_vertices
    indptr, indices = _csr(g.num_vertices, src.astype(np.int64), dst.astype(np.int64))
    return EnhancedGraph(g.points, indptr, indices)


def broadcast_enhance(sample, radii, norm: NormSpec) -> RadiusAssignment:
    """One synchronous round: every vertex adopts the largest radius among
    itself and the vertices whose (original) ball contains it."""
    g = build_digraph(sample, radii, norm)
    r = g.radii.radii
    new = r.copy()
    s, t = g.edges()
    np.maximum.at(new, t, r[s])
    params = dict(g.radii.params)
    params["source_mode"] = g.radii.mode
    return RadiusAssignment(new, "broadcast", params)


def is_connected(g: EnhancedGraph) -> bool:
    if g.num_vertices <= 1:
        return True
    s, t = g.edges()
    return _kernels.count_components(g.num_vertices, s, t) == 1


def num_components(g: EnhancedGraph) -> int:
    s, t = g.edges()
    return _kernels.count_components(g.num_vertices, s, t)


# --------------------------------------------------------------------------
# radii


def connectivity_m(d: int) -> float:
    return max(2.0**j * (d - j) / d for j in range(d))


def connectivity_half_width(d: int, epsilon: float, n: float, theta_d: float) -> float:
    """Half side m_n of the target box in h-coordinates."""
    return ((1.0 + epsilon) * connectivity_m(d) * math.log(n) / (n * theta_d)) ** (1.0 / d)


def connectivity_radii(sample, density: DensityModel, norm: NormSpec, epsilon: float, n: float) -> RadiusAssignment:
    """Smallest l_inf radius whose h-image covers the box of half side m_n
    around h(x), intersected with the unit cube."""
    if not isinstance(density, ProductDensity):
        raise TypeError("connectivity radii need a product density")
    if norm.p != math.inf:
        raise ValueError("connectivity radii are defined for the l_inf norm only")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    pts = _points_of(sample)
    m_n = connectivity_half_width(density.dim, epsilon, n, norm.theta_d)
    params = {"epsilon": float(epsilon), "n": float(n), "m": connectivity_m(density.dim), "m_n": m_n}
    if len(pts) == 0:
        return RadiusAssignment(np.zeros(0), "connectivity", params)
    h = density.cdf_coords(pts)
    lo = density.ppf_coords(np.clip(h - m_n, 0.0, 1.0))
    hi = density.ppf_coords(np.clip(h + m_n, 0.0, 1.0))
    r = np.max(np.maximum(pts - lo, hi - pts), axis=1)
    return RadiusAssignment(np.clip(r, 0.0, None), "connectivity", params)


def assign_radii(sample, density: DensityModel, norm: NormSpec, mode, *, tolerances=DEFAULT_TOLERANCES,
                 budget=DEFAULT_BUDGET) -> RadiusAssignment:
    pts = _points_of(sample)
    n = sample.n if isinstance(sample, PointSample) else None
    if isinstance(mode, dict):
        n = mode.get("n", n)
        mode = mode_from_dict(mode)
    if n is None:
        raise ValueError("intensity n unknown; pass a PointSample")
    if isinstance(mode, FixedC):
        kw = dict(tolerances=tolerances, budget=budget)
        r = cutoff_radii(density, norm, pts, mode.c, n, **kw) if len(pts) else np.zeros(0)
        return RadiusAssignment(r, "fixed_c", {"c": mode.c, "n": float(n)})
    if isinstance(mode, FixedBeta):
        kw = dict(tolerances=tolerances, budget=budget)
        r = poisson_cutoff_radii(density, norm, pts, mode.beta, n, **kw) if len(pts) else np.zeros(0)
        return RadiusAssignment(r, "fixed_beta", {"beta": mode.beta, "n": float(n)})
    if isinstance(mode, Connectivity):
        return connectivity_radii(pts, density, norm, mode.epsilon, n)
    raise TypeError(f"unknown radius mode {mode!r}")


# --------------------------------------------------------------------------
# export


def write_edge_list(g: DirectedGeoGraph | EnhancedGraph, path) -> None:
    s, t = g.edges()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["src", "dst"])
        w.writerows(zip(s.tolist(), t.tolist()))


def read_edge_list(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["src", "dst"]:
        raise ValueError(f"{path}: header must be src,dst")
    arr = np.array(rows[1:], dtype=np.int64).reshape(-1, 2)
    return arr[:, 0], arr[:, 1]


def graph_summary(g: DirectedGeoGraph | EnhancedGraph) -> dict:
    deg = g.out_degrees if isinstance(g, DirectedGeoGraph) else g.degrees
    hist = np.bincount(deg) if len(deg) else np.zeros(0, dtype=np.int64)
    return {
        "type": "directed" if isinstance(g, DirectedGeoGraph) else "undirected",
        "N": int(g.num_vertices),
        "edges": int(g.num_edges),
        "degree_histogram": {str(k): int(v) for k, v in enumerate(hist) if v},
    }


def write_summary(g, path) -> None:
    with open(path, "w") as fh:
        json.dump(graph_summary(g), fh, indent=2, sort_keys=True)
        fh.write("\n")
