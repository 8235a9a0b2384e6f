"""Seeded draws of the Poisson process with intensity n f."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .density.models import DensityModel

RNG_ID = "numpy.Philox-4x64 via SeedSequence"


class CapExceeded(RuntimeError):
    pass


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


def replicate_seed(base_seed: int, n_index: int, replicate: int) -> int:
    """64-bit seed for one (n, replicate) cell, independent of run order."""
    ss = np.random.SeedSequence(int(base_seed), spawn_key=(int(n_index), int(replicate)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class SampleSpec:
    n: float
    seed: int
    density: DensityModel
    max_points: int | None = None

    def __post_init__(self):
        if not self.n > 1:
            raise ValueError("intensity n must exceed 1")
        floor = int(math.ceil(self.n + 10.0 * math.sqrt(self.n)))
        if self.max_points is None:
            object.__setattr__(self, "max_points", floor)
        elif self.max_points < floor:
            raise ValueError(f"max_points must be at least n + 10 sqrt(n) = {floor}")


@dataclass(frozen=True)
class PointSample:
    points: np.ndarray
    count: int
    spec: SampleSpec

    def __post_init__(self):
        if len(self.points) != self.count:
            raise ValueError("point array length does not match the realised count")
        self.points.setflags(write=False)

    @property
    def n(self) -> float:
        return self.spec.n

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def poisson_count(n: float, rng: np.random.Generator) -> int:
    if n <= 0:
        raise ValueError("intensity must be positive")
    return int(rng.poisson(n))


def sample_iid(density: DensityModel, count: int, rng: np.random.Generator) -> np.ndarray:
    if count < 0:
        raise ValueError("count must be >= 0")
    if count == 0:
        return np.zeros((0, density.dim))
    return np.asarray(density.sample(count, rng), dtype=float)


def sample_process(spec: SampleSpec) -> PointSample:
    rng = make_rng(spec.seed)
    count = poisson_count(spec.n, rng)
    if count > spec.max_points:
        raise CapExceeded(f"realised count {count} exceeds cap {spec.max_points} (seed {spec.seed})")
    pts = sample_iid(spec.density, count, rng)
    return PointSample(np.ascontiguousarray(pts), count, spec)


def save_points(sample: PointSample | np.ndarray, path) -> None:
    pts = sample.points if isinstance(sample, PointSample) else np.asarray(sample)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{k}" for k in range(pts.shape[1])])
        for row in pts:
            w.writerow([repr(float(v)) for v in row])


def load_points(path) -> np.ndarray:
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or not all(h == f"x{k}" for k, h in enumerate(rows[0])):
        raise ValueError(f"{path}: header must be x0,...,x(d-1)")
    d = len(rows[0])
    return np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, d)
