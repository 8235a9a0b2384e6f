"""l_p norms on R^d and the volumes of their unit balls."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

_ALLOWED_P = (1.0, 2.0, math.inf)


def parse_p(p) -> float:
    """Accept 1, 2, inf (or the strings "1", "2", "inf", "infinity")."""
    if isinstance(p, str):
        key = p.strip().lower()
        if key in ("inf", "infinity", "max", "linf"):
            return math.inf
        p = float(key)
    p = float(p)
    if p not in _ALLOWED_P:
        raise ValueError(f"norm p must be one of 1, 2, inf; got {p!r}")
    return p


def unit_ball_volume(p: float, d: int) -> float:
    p = parse_p(p)
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if p == math.inf:
        return 2.0**d
    if p == 1.0:
        return 2.0**d / math.factorial(d)
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


@dataclass(frozen=True)
class NormSpec:
    """An l_p norm (p in {1, 2, inf}) on R^d."""

    p: float
    d: int
    theta_d: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "p", parse_p(self.p))
        if int(self.d) != self.d or self.d < 1:
            raise ValueError("dimension must be a positive integer")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "theta_d", unit_ball_volume(self.p, self.d))

    @property
    def p_code(self) -> int:
        """Integer code used by the compiled kernels: 1, 2, or 0 for inf."""
        return 0 if self.p == math.inf else int(self.p)

    @property
    def label(self) -> str:
        return "inf" if self.p == math.inf else str(int(self.p))

    def norm(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        return np.linalg.norm(v, ord=self.p, axis=-1)

    def distance(self, x, y) -> np.ndarray:
        return self.norm(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))

    def direction_scale(self, u) -> np.ndarray:
        """||u||_p for unit-l2 directions u; a ray x + s*u leaves B(x, r) at s = r / scale."""
        return self.norm(u)
