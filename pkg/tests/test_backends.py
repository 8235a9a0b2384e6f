import os
import subprocess
import sys

import numpy as np
import pytest

from nurgg import _kernels
from nurgg.density import NormSpec
from nurgg.density.models import _cosine_gauss_nodes
from nurgg.graph import GridIndex

core = _kernels.compiled()
pure = _kernels.pure
needs_core = pytest.mark.skipif(core is None, reason="compiled extension not built")


@needs_core
@pytest.mark.parametrize("p", ["inf", 1, 2])
def test_grid_out_edges_agree(p, rng):
    pts = rng.random((3000, 2))
    r = 0.04 * rng.random(3000)
    norm = NormSpec(p, 2)
    gi = GridIndex(pts, r.max())
    a = core.grid_out_edges(pts, r, norm.p_code, gi.origin, gi.cell, gi.dims)
    b = pure.grid_out_edges(pts, r, norm.p_code, gi.origin, gi.cell, gi.dims)
    assert np.array_equal(np.asarray(a[0]), np.asarray(b[0]))
    assert np.array_equal(np.asarray(a[1]), np.asarray(b[1]))


@needs_core
@pytest.mark.parametrize("kind,r_in,p", [(pure.RADIAL_INTERIOR, 0.0, 1.0), (pure.RADIAL_EDGE, 0.5, 1.0),
                                         (pure.RADIAL_INTERIOR, 0.0, 2.5)])
def test_radial_ball_mass_agree(kind, r_in, p, rng):
    s = rng.random(500)
    r = 1.5 * rng.random(500)
    t, w = _cosine_gauss_nodes()
    a = np.asarray(core.radial_ball_mass(s, r, kind, r_in, p, 2, 1.0, t, w))
    b = np.asarray(pure.radial_ball_mass(s, r, kind, r_in, p, 2, 1.0, t, w))
    assert np.allclose(a, b, rtol=1e-12, atol=1e-14)


@needs_core
def test_count_components_agree(rng):
    for _ in range(20):
        n = int(rng.integers(1, 300))
        m = int(rng.integers(0, 2 * n))
        src = rng.integers(0, n, m).astype(np.int64)
        dst = rng.integers(0, n, m).astype(np.int64)
        assert core.count_components(n, src, dst) == pure.count_components(n, src, dst)


def test_count_components_examples():
    e = np.zeros(0, dtype=np.int64)
    assert pure.count_components(0, e, e) == 0
    assert pure.count_components(4, e, e) == 4
    assert pure.count_components(4, np.array([0, 2]), np.array([1, 3])) == 2


def test_backend_flag_forces_python():
    code = "import nurgg; print(nurgg.BACKEND)"
    env = dict(os.environ, NURGG_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
    env["NURGG_PURE_PYTHON"] = "0"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == ("cython" if core is not None else "python")
