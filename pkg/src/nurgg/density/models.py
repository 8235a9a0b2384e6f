"""Density families on R^d.

Every model evaluates pointwise, knows a bounding box of its support, can
draw i.i.d. samples, and may offer a closed form for ball masses under some
norms (``closed_ball_mass`` returns NaN where it has none).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, stats

from .. import _kernels
from .._pure import RADIAL_EDGE, RADIAL_INTERIOR, radial_partial_integral
from .norms import NormSpec, unit_ball_volume


class DimensionError(ValueError):
    pass


class SamplingError(RuntimeError):
    pass


def _as_points(x, d) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != d:
        raise DimensionError(f"expected points of dimension {d}, got shape {np.shape(x)}")
    return x


def sphere_area(d: int) -> float:
    """Surface area of the unit l2 sphere in R^d."""
    return d * unit_ball_volume(2, d)


class DensityModel:
    """Base class.  Subclasses set ``dim``, ``lower``, ``upper``."""

    kind: str = "abstract"
    dim: int
    lower: np.ndarray
    upper: np.ndarray
    f_min: float | None = None
    f_max: float | None = None

    def pdf(self, x) -> np.ndarray:
        raise NotImplementedError

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def closed_ball_mass(self, norm: NormSpec, x: np.ndarray, r: np.ndarray) -> np.ndarray:
        return np.full(len(x), np.nan)

    def describe(self) -> dict:
        return {"kind": self.kind, "dimension": self.dim}

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.upper - self.lower))

    def support_exit(self, x, u) -> np.ndarray:
        """Distance along unit rays u (m, d) from centres x (c, d) to the edge of
        the support region (inf for centres outside it)."""
        with np.errstate(divide="ignore", invalid="ignore"):
            step_hi = (self.upper[None, None, :] - x[:, None, :]) / u[None, :, :]
            step_lo = (self.lower[None, None, :] - x[:, None, :]) / u[None, :, :]
        t = np.where(u[None, :, :] > 0, step_hi, np.where(u[None, :, :] < 0, step_lo, np.inf))
        out = np.min(t, axis=2)
        return np.where(self.in_bbox(x)[:, None], out, np.inf)

    def in_bbox(self, x) -> np.ndarray:
        x = _as_points(x, self.dim)
        return np.all((x >= self.lower) & (x <= self.upper), axis=1)


# --------------------------------------------------------------------------
# product densities


@dataclass(frozen=True)
class Marginal:
    """A 1-D continuous distribution on [lo, hi] with pdf, cdf and quantile."""

    name: str
    lo: float
    hi: float
    pdf: Callable
    cdf: Callable
    ppf: Callable
    params: dict = field(default_factory=dict)

    @classmethod
    def uniform(cls, lo: float = 0.0, hi: float = 1.0) -> "Marginal":
        w = hi - lo
        return cls(
            "uniform",
            lo,
            hi,
            pdf=lambda t: np.where((t >= lo) & (t <= hi), 1.0 / w, 0.0),
            cdf=lambda t: np.clip((np.asarray(t, float) - lo) / w, 0.0, 1.0),
            ppf=lambda u: lo + w * np.asarray(u, float),
            params={"lo": lo, "hi": hi},
        )

    @classmethod
    def power(cls, k: float) -> "Marginal":
        """CDF t^k on [0, 1]; k=2 is the rising triangular density 2t."""
        if k <= 0:
            raise ValueError("power marginal needs k > 0")
        return cls(
            "power",
            0.0,
            1.0,
            pdf=lambda t: np.where((t >= 0) & (t <= 1), k * np.clip(t, 0, 1) ** (k - 1), 0.0),
            cdf=lambda t: np.clip(np.asarray(t, float), 0.0, 1.0) ** k,
            ppf=lambda u: np.asarray(u, float) ** (1.0 / k),
            params={"k": k},
        )

    @classmethod
    def beta(cls, a: float, b: float) -> "Marginal":
        dist = stats.beta(a, b)
        return cls(
            "beta",
            0.0,
            1.0,
            pdf=lambda t: np.where((t >= 0) & (t <= 1), dist.pdf(np.clip(t, 0, 1)), 0.0),
            cdf=lambda t: dist.cdf(np.clip(t, 0.0, 1.0)),
            ppf=dist.ppf,
            params={"a": a, "b": b},
        )

    @classmethod
    def truncated_normal(cls, mu: float, sigma: float, lo: float, hi: float) -> "Marginal":
        dist = stats.truncnorm((lo - mu) / sigma, (hi - mu) / sigma, loc=mu, scale=sigma)
        return cls(
            "truncated_normal",
            lo,
            hi,
            pdf=lambda t: np.where((t >= lo) & (t <= hi), dist.pdf(np.clip(t, lo, hi)), 0.0),
            cdf=lambda t: dist.cdf(np.clip(t, lo, hi)),
            ppf=dist.ppf,
            params={"mu": mu, "sigma": sigma, "lo": lo, "hi": hi},
        )

    @classmethod
    def from_config(cls, cfg: dict) -> "Marginal":
        cfg = dict(cfg)
        name = cfg.pop("name")
        factory = {
            "uniform": cls.uniform,
            "power": cls.power,
            "beta": cls.beta,
            "truncated_normal": cls.truncated_normal,
        }.get(name)
        if factory is None:
            raise ValueError(f"unknown marginal {name!r}")
        return factory(**cfg)


class ProductDensity(DensityModel):
    """Independent coordinates, f(x) = prod_k f_k(x_k)."""

    kind = "product"

    def __init__(self, marginals: Sequence[Marginal]):
        if not marginals:
            raise ValueError("need at least one marginal")
        self.marginals = tuple(marginals)
        self.dim = len(self.marginals)
        self.lower = np.array([m.lo for m in self.marginals], dtype=float)
        self.upper = np.array([m.hi for m in self.marginals], dtype=float)

    def pdf(self, x) -> np.ndarray:
        x = _as_points(x, self.dim)
        out = np.ones(len(x))
        for k, m in enumerate(self.marginals):
            out *= m.pdf(x[:, k])
        return out

    def cdf_coords(self, x) -> np.ndarray:
        x = _as_points(x, self.dim)
        return np.column_stack([m.cdf(x[:, k]) for k, m in enumerate(self.marginals)])

    def ppf_coords(self, u) -> np.ndarray:
        u = _as_points(u, self.dim)
        return np.column_stack([m.ppf(u[:, k]) for k, m in enumerate(self.marginals)])

    def sample(self, count, rng):
        u = rng.random((count, self.dim))
        return self.ppf_coords(u) if count else np.zeros((0, self.dim))

    def closed_ball_mass(self, norm, x, r):
        if norm.p != math.inf:
            return np.full(len(x), np.nan)
        r = np.broadcast_to(np.asarray(r, dtype=float), (len(x),))
        out = np.ones(len(x))
        for k, m in enumerate(self.marginals):
            out *= m.cdf(x[:, k] + r) - m.cdf(x[:, k] - r)
        return out

    def describe(self):
        return {
            "kind": self.kind,
            "dimension": self.dim,
            "marginals": [{"name": m.name, **m.params} for m in self.marginals],
        }


class UniformCube(ProductDensity):
    """Uniform density on [0, 1]^d."""

    kind = "uniform_cube"

    def __init__(self, d: int):
        super().__init__([Marginal.uniform()] * int(d))
        self.f_min = self.f_max = 1.0

    def pdf(self, x):
        x = _as_points(x, self.dim)
        return np.all((x >= 0.0) & (x <= 1.0), axis=1).astype(float)

    def sample(self, count, rng):
        return rng.random((count, self.dim))

    def closed_ball_mass(self, norm, x, r):
        r = np.broadcast_to(np.asarray(r, dtype=float), (len(x),))
        if norm.p == math.inf:
            lo = np.maximum(x - r[:, None], 0.0)
            hi = np.minimum(x + r[:, None], 1.0)
            return np.prod(np.clip(hi - lo, 0.0, None), axis=1)
        # l1 / l2: closed form only while the ball stays inside the cube
        inside = np.all((x - r[:, None] >= 0.0) & (x + r[:, None] <= 1.0), axis=1)
        return np.where(inside, norm.theta_d * r**norm.d, np.nan)

    def describe(self):
        return {"kind": self.kind, "dimension": self.dim}


# --------------------------------------------------------------------------
# radially symmetric densities on the unit l2 ball

_GL_T, _GL_W = None, None


def _cosine_gauss_nodes(q: int = 48):
    global _GL_T, _GL_W
    if _GL_T is None or len(_GL_T) != q:
        x, w = np.polynomial.legendre.leggauss(q)
        _GL_T = 0.5 * math.pi * (x + 1.0)
        _GL_W = 0.5 * math.pi * w
    return _GL_T, _GL_W


class _RadialDensity(DensityModel):
    radial_kind: int
    r_in: float

    def __init__(self, d: int, p: float):
        if d < 1:
            raise ValueError("dimension must be >= 1")
        if p < 0:
            raise ValueError("exponent p must be >= 0")
        self.dim = int(d)
        self.p = float(p)
        self.lower = -np.ones(self.dim)
        self.upper = np.ones(self.dim)
        self._total = float(radial_partial_integral(1.0, self.radial_kind, self.r_in, self.p, self.dim))
        self.A = 1.0 / (sphere_area(self.dim) * self._total)
        self.f_min = 0.0

    def support_exit(self, x, u):
        xu = x @ u.T
        xx = np.sum(x * x, axis=1)[:, None]
        t = -xu + np.sqrt(np.clip(xu * xu - xx + 1.0, 0.0, None))
        return np.where(xx <= 1.0, t, np.inf)

    def radial_pdf(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        if self.radial_kind == RADIAL_EDGE:
            val = np.clip(rho - self.r_in, 0.0, None) ** self.p
            return np.where((rho >= self.r_in) & (rho <= 1.0), self.A * val, 0.0)
        return np.where(rho <= 1.0, self.A * np.clip(1.0 - rho, 0.0, None) ** self.p, 0.0)

    def pdf(self, x):
        x = _as_points(x, self.dim)
        return self.radial_pdf(np.linalg.norm(x, axis=1))

    def radial_cdf(self, rho) -> np.ndarray:
        """P(|X| <= rho)."""
        lo = self.r_in if self.radial_kind == RADIAL_EDGE else 0.0
        j0 = radial_partial_integral(lo, self.radial_kind, self.r_in, self.p, self.dim)
        j = radial_partial_integral(rho, self.radial_kind, self.r_in, self.p, self.dim)
        return (j - j0) / self._total

    def radial_ppf(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        lo = np.full(u.shape, self.r_in if self.radial_kind == RADIAL_EDGE else 0.0)
        hi = np.ones(u.shape)
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            below = self.radial_cdf(mid) < u
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return 0.5 * (lo + hi)

    def sample(self, count, rng):
        if count == 0:
            return np.zeros((0, self.dim))
        g = rng.standard_normal((count, self.dim))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        rho = self.radial_ppf(rng.random(count))
        return g * rho[:, None]

    def closed_ball_mass(self, norm, x, r):
        if norm.p != 2.0:
            return np.full(len(x), np.nan)
        r = np.broadcast_to(np.asarray(r, dtype=float), (len(x),))
        s = np.linalg.norm(x, axis=1)
        t, w = _cosine_gauss_nodes()
        scale = self.A * sphere_area(self.dim)
        return np.asarray(
            _kernels.radial_ball_mass(s, r, self.radial_kind, self.r_in, self.p, self.dim, scale, t, w)
        )


class RadialInteriorVanishing(_RadialDensity):
    """f(x) = A (1 - |x|)^p on the unit ball (vanishes at the rim)."""

    kind = "radial_interior"
    radial_kind = RADIAL_INTERIOR

    def __init__(self, d: int = 2, p: float = 1.0):
        self.r_in = 0.0
        super().__init__(d, p)
        self.f_max = self.A

    def describe(self):
        return {"kind": self.kind, "dimension": self.dim, "p": self.p, "A": self.A}


class RadialEdgeVanishing(_RadialDensity):
    """f(x) = A (|x| - r)^p for r <= |x| <= 1, zero on the inner ball B(0, r)."""

    kind = "radial_edge"
    radial_kind = RADIAL_EDGE

    def __init__(self, d: int = 2, r: float = 0.5, p: float = 1.0):
        if not 0.0 < r < 1.0:
            raise ValueError("inner radius must lie in (0, 1)")
        self.r_in = float(r)
        super().__init__(d, p)
        self.f_max = self.A * (1.0 - self.r_in) ** self.p

    def describe(self):
        return {"kind": self.kind, "dimension": self.dim, "r": self.r_in, "p": self.p, "A": self.A}


# --------------------------------------------------------------------------
# class H: box background with polynomially vanishing holes


@dataclass(frozen=True)
class HolePatch:
    """A ball B(center, r) where the density vanishes.

    Between r and delta the density rises back to the background level as
    sum_j w_j ((rho - r)/(delta - r))^p_j / sum_j w_j; if eta > 0 an island
    B(center, eta) carries sum_j w_j ((eta - rho)/eta)^p_j / sum_j w_j.
    """

    center: tuple
    r: float
    delta: float
    eta: float = 0.0
    terms: tuple = ((1.0, 1.0),)

    def __post_init__(self):
        if not 0.0 <= self.eta < self.r < self.delta:
            raise ValueError("patch needs 0 <= eta < r < delta")
        if not self.terms or any(w <= 0 or p < 0 for w, p in self.terms):
            raise ValueError("patch terms need positive weights and exponents >= 0")

    def shape(self, rho) -> np.ndarray:
        """Density relative to the background level at distance rho from the centre."""
        rho = np.asarray(rho, dtype=float)
        wsum = sum(w for w, _ in self.terms)
        rise = np.clip((rho - self.r) / (self.delta - self.r), 0.0, 1.0)
        out = np.where(rho >= self.delta, 1.0, 0.0)
        ring = (rho > self.r) & (rho < self.delta)
        out = np.where(ring, sum(w * rise**p for w, p in self.terms) / wsum, out)
        if self.eta > 0:
            fall = np.clip((self.eta - rho) / self.eta, 0.0, 1.0)
            island = rho < self.eta
            out = np.where(island, sum(w * fall**p for w, p in self.terms) / wsum, out)
        return out

    def radial_deficit(self, d: int) -> float:
        """int_{B(center, delta)} (1 - shape), i.e. volume the patch removes."""
        area = sphere_area(d)
        val, _ = integrate.quad(lambda t: (1.0 - float(self.shape(t))) * t ** (d - 1), 0.0, self.delta,
                                points=[p for p in (self.eta, self.r) if p > 0], limit=200)
        return area * val


class ClassH(DensityModel):
    """Constant background on a box, with polynomially vanishing hole patches.

    The background level is fixed at construction so the whole density
    integrates to one; effective patch coefficients are exposed as
    ``coefficients``.
    """

    kind = "class_h"

    def __init__(self, lower, upper, patches: Sequence[HolePatch] = ()):
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        if self.lower.shape != self.upper.shape or np.any(self.upper <= self.lower):
            raise ValueError("box needs lower < upper in every coordinate")
        self.dim = len(self.lower)
        self.patches = tuple(patches)
        for i, pa in enumerate(self.patches):
            c = np.asarray(pa.center, dtype=float)
            if c.shape != (self.dim,):
                raise DimensionError(f"patch {i} centre has wrong dimension")
            if np.any(c - pa.delta < self.lower) or np.any(c + pa.delta > self.upper):
                raise ValueError(f"patch {i} does not fit inside the box")
            for j in range(i):
                other = self.patches[j]
                if np.linalg.norm(c - np.asarray(other.center)) < pa.delta + other.delta:
                    raise ValueError(f"patches {j} and {i} overlap")
        volume = float(np.prod(self.upper - self.lower))
        removed = sum(pa.radial_deficit(self.dim) for pa in self.patches)
        self.level = 1.0 / (volume - removed)
        self.f_max = self.level
        self.f_min = 0.0 if self.patches else self.level

    @property
    def coefficients(self) -> list[list[float]]:
        """A_ij such that f = sum_j A_ij (|y - x_i| - r_i)^p_ij on the rising ring."""
        out = []
        for pa in self.patches:
            wsum = sum(w for w, _ in pa.terms)
            out.append([self.level * w / (wsum * (pa.delta - pa.r) ** p) for w, p in pa.terms])
        return out

    def pdf(self, x):
        x = _as_points(x, self.dim)
        out = np.where(self.in_bbox(x), self.level, 0.0)
        for pa in self.patches:
            rho = np.linalg.norm(x - np.asarray(pa.center), axis=1)
            near = rho < pa.delta
            if np.any(near):
                out[near] *= pa.shape(rho[near])
        return out

    def sample(self, count, rng, min_acceptance: float = 1e-3):
        out = np.zeros((0, self.dim))
        if count == 0:
            return out
        got = []
        n_got = 0
        tried = accepted = 0
        while n_got < count:
            batch = max(64, int(1.3 * (count - n_got)) + 16)
            prop = self.lower + (self.upper - self.lower) * rng.random((batch, self.dim))
            keep = rng.random(batch) * self.f_max <= self.pdf(prop)
            tried += batch
            accepted += int(keep.sum())
            if tried > 10_000 and accepted / tried < min_acceptance:
                raise SamplingError(f"rejection acceptance rate {accepted / tried:.2e} below floor")
            got.append(prop[keep])
            n_got += int(keep.sum())
        return np.concatenate(got)[:count]

    def describe(self):
        return {
            "kind": self.kind,
            "dimension": self.dim,
            "lower": self.lower.tolist(),
            "upper": self.upper.tolist(),
            "level": self.level,
            "patches": [
                {
                    "center": list(pa.center),
                    "r": pa.r,
                    "delta": pa.delta,
                    "eta": pa.eta,
                    "terms": [list(t) for t in pa.terms],
                }
                for pa in self.patches
            ],
        }


def continuity_defect(density: DensityModel, rng: np.random.Generator, probes: int = 2000,
                      h: float = 1e-7) -> float:
    """Largest |f(x) - f(x + h e)| over random probes away from the support box edge."""
    span = density.upper - density.lower
    x = density.lower + span * (0.02 + 0.96 * rng.random((probes, density.dim)))
    e = rng.standard_normal((probes, density.dim))
    e /= np.linalg.norm(e, axis=1, keepdims=True)
    return float(np.max(np.abs(density.pdf(x) - density.pdf(x + h * e))))


def pdf_eval(density: DensityModel, x) -> float | np.ndarray:
    """f(x) for one point (returns a float) or a stack of points."""
    arr = np.asarray(x, dtype=float)
    vals = density.pdf(arr)
    return float(vals[0]) if arr.ndim == 1 else vals


def density_from_config(cfg: dict) -> DensityModel:
    """Build a density from a config mapping (see README for the schema)."""
    cfg = dict(cfg)
    kind = cfg.pop("kind")
    d = int(cfg.pop("dimension", 2))
    if kind == "uniform_cube":
        return UniformCube(d)
    if kind == "product":
        margs = [Marginal.from_config(m) for m in cfg["marginals"]]
        if len(margs) != d:
            raise DimensionError("number of marginals must equal the dimension")
        return ProductDensity(margs)
    if kind == "radial_interior":
        return RadialInteriorVanishing(d, cfg.get("p", 1.0))
    if kind == "radial_edge":
        return RadialEdgeVanishing(d, cfg.get("r", 0.5), cfg.get("p", 1.0))
    if kind == "class_h":
        patches = [
            HolePatch(
                center=tuple(float(c) for c in pa["center"]),
                r=float(pa["r"]),
                delta=float(pa["delta"]),
                eta=float(pa.get("eta", 0.0)),
                terms=tuple((float(w), float(p)) for w, p in pa.get("terms", [[1.0, 1.0]])),
            )
            for pa in cfg.get("patches", [])
        ]
        lower = cfg.get("lower", [0.0] * d)
        upper = cfg.get("upper", [1.0] * d)
        return ClassH(lower, upper, patches)
    raise ValueError(f"unknown density kind {kind!r}")


__all__ = [
    "ClassH",
    "DensityModel",
    "DimensionError",
    "HolePatch",
    "Marginal",
    "ProductDensity",
    "RadialEdgeVanishing",
    "RadialInteriorVanishing",
    "SamplingError",
    "UniformCube",
    "continuity_defect",
    "density_from_config",
    "pdf_eval",
    "sphere_area",
]
