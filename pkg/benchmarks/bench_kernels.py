"""Compiled vs numpy kernels.

    python benchmarks/bench_kernels.py [--n 20000] [--repeat 5]

Prints the best wall time per kernel and backend, and checks that both
backends return the same answer.
"""
import argparse
import math
import sys
import time

import numpy as np

from nurgg import _kernels
from nurgg.density import NormSpec
from nurgg.density.models import _cosine_gauss_nodes
from nurgg.graph import GridIndex


def best_of(fn, repeat):
    times, out = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def same(a, b):
    if isinstance(a, tuple):
        return all(np.array_equal(np.asarray(x), np.asarray(y)) for x, y in zip(a, b))
    if np.ndim(a):
        return np.allclose(np.asarray(a), np.asarray(b), rtol=1e-12, atol=1e-14)
    return a == b


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20000, help="points per instance")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args(argv)

    core = _kernels.compiled()
    if core is None:
        print("compiled extension not built; nothing to compare", file=sys.stderr)
        return 1
    pure = _kernels.pure
    rng = np.random.default_rng(args.seed)
    n = args.n

    pts = rng.random((n, 2))
    r = np.full(n, math.sqrt(math.log(n) / (4 * n)))
    norm = NormSpec("inf", 2)
    gi = GridIndex(pts, r.max())
    edges = lambda mod: mod.grid_out_edges(pts, r, norm.p_code, gi.origin, gi.cell, gi.dims)

    s, rad = rng.random(n), 0.3 * rng.random(n)
    t, w = _cosine_gauss_nodes()
    radial = lambda mod: mod.radial_ball_mass(s, rad, pure.RADIAL_INTERIOR, 0.0, 1.0, 2, 3.0 / math.pi * 2 * math.pi, t, w)

    src, dst = (np.asarray(a, dtype=np.int64) for a in pure.grid_out_edges(pts, r, norm.p_code, gi.origin, gi.cell, gi.dims))
    src = np.repeat(np.arange(n, dtype=np.int64), np.diff(src))
    comps = lambda mod: mod.count_components(n, src, dst)

    print(f"{'kernel':<18}{'cython s':>12}{'python s':>12}{'speedup':>10}  agree")
    for name, fn in (("grid_out_edges", edges), ("radial_ball_mass", radial), ("count_components", comps)):
        tc, oc = best_of(lambda: fn(core), args.repeat)
        tp, op = best_of(lambda: fn(pure), args.repeat)
        print(f"{name:<18}{tc:>12.4f}{tp:>12.4f}{tp / tc:>9.1f}x  {same(oc, op)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
