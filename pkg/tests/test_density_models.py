import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from nurgg.density import (
    ClassH,
    DimensionError,
    HolePatch,
    Marginal,
    NormSpec,
    ProductDensity,
    RadialEdgeVanishing,
    RadialInteriorVanishing,
    UniformCube,
    continuity_defect,
    density_from_config,
    h_transform,
    pdf_eval,
    unit_ball_volume,
)


def test_unit_ball_volumes():
    assert unit_ball_volume(math.inf, 3) == 8.0
    assert unit_ball_volume(1, 3) == pytest.approx(8 / 6)
    assert unit_ball_volume(2, 2) == pytest.approx(math.pi)
    assert unit_ball_volume(2, 3) == pytest.approx(4 * math.pi / 3)


@pytest.mark.parametrize("p", ["inf", 1, 2, "2"])
def test_norm_parse_and_theta(p):
    n = NormSpec(p, 2)
    assert n.theta_d > 0


def test_norm_rejects_other_p():
    with pytest.raises(ValueError):
        NormSpec(3, 2)
    with pytest.raises(ValueError):
        NormSpec(2, 0)


@settings(max_examples=60, deadline=None)
@given(
    st.sampled_from(["inf", 1, 2]),
    st.lists(st.floats(-5, 5), min_size=6, max_size=6),
)
def test_norm_metric_axioms(p, v):
    n = NormSpec(p, 2)
    x, y, z = np.array(v[:2]), np.array(v[2:4]), np.array(v[4:])
    assert n.distance(x, x) == 0
    assert n.distance(x, y) == pytest.approx(n.distance(y, x))
    assert n.distance(x, z) <= n.distance(x, y) + n.distance(y, z) + 1e-12


def test_pdf_examples(unif2, c_int, c_edge):
    assert pdf_eval(unif2, (0.3, 0.7)) == 1.0
    assert pdf_eval(c_int, (0.0, 0.0)) == pytest.approx(3 / math.pi)
    assert pdf_eval(c_edge, (0.25, 0.0)) == 0.0


def test_pdf_zero_outside_support(unif2, c_int, c_edge):
    for d in (unif2, c_int, c_edge):
        assert pdf_eval(d, (1.5, 1.5)) == 0.0


def test_pdf_dimension_mismatch(unif2):
    with pytest.raises(DimensionError):
        pdf_eval(unif2, (0.1, 0.2, 0.3))


def test_radial_forms(c_int, c_edge):
    x = np.array([[0.3, 0.4]])  # |x| = 0.5
    assert c_int.pdf(x)[0] == pytest.approx(c_int.A * 0.5)
    assert c_edge.pdf(np.array([[0.6, 0.0]]))[0] == pytest.approx(c_edge.A * 0.1)
    assert c_edge.pdf(np.array([[0.49, 0.0]]))[0] == 0.0


def test_edge_normaliser_matches_direct_integral(c_edge):
    # A * 2 pi int_{1/2}^1 (rho - 1/2) rho d rho = 1, and the integral is 5/48
    assert c_edge.A == pytest.approx(48 / (10 * math.pi))


@pytest.mark.parametrize(
    "density",
    [
        UniformCube(2),
        RadialInteriorVanishing(2, 1.0),
        RadialInteriorVanishing(3, 2.0),
        RadialEdgeVanishing(2, 0.5, 1.0),
        ProductDensity([Marginal.power(2.0), Marginal.beta(2.0, 3.0)]),
        ClassH([0, 0], [1, 1], [HolePatch((0.4, 0.4), 0.1, 0.2)]),
    ],
    ids=["uniform", "c_int", "c_int3", "c_edge", "product", "class_h"],
)
def test_normalisation_monte_carlo(density, rng):
    m = 400_000
    span = density.upper - density.lower
    x = density.lower + span * rng.random((m, density.dim))
    vals = density.pdf(x) * np.prod(span)
    est, se = vals.mean(), vals.std(ddof=1) / math.sqrt(m)
    assert abs(est - 1.0) <= 3 * se


@pytest.mark.parametrize(
    "density",
    [RadialInteriorVanishing(2, 1.0), RadialEdgeVanishing(2, 0.5, 1.0),
     ClassH([0, 0], [1, 1], [HolePatch((0.4, 0.4), 0.1, 0.2, eta=0.05, terms=((1.0, 1.0), (2.0, 3.0)))])],
    ids=["c_int", "c_edge", "class_h"],
)
def test_continuity(density, rng):
    assert continuity_defect(density, rng, probes=5000, h=1e-7) < 1e-4


def test_class_h_validation():
    with pytest.raises(ValueError):
        ClassH([0, 0], [1, 1], [HolePatch((0.05, 0.5), 0.1, 0.2)])  # leaves the box
    with pytest.raises(ValueError):
        ClassH([0, 0], [1, 1], [HolePatch((0.4, 0.5), 0.05, 0.1), HolePatch((0.55, 0.5), 0.05, 0.1)])
    with pytest.raises(ValueError):
        HolePatch((0.5, 0.5), 0.2, 0.1)


def test_class_h_vanishes_in_hole_and_coefficients():
    h = ClassH([0, 0], [1, 1], [HolePatch((0.5, 0.5), 0.1, 0.2, terms=((1.0, 2.0),))])
    assert h.pdf(np.array([[0.55, 0.5]]))[0] == 0.0
    assert h.pdf(np.array([[0.9, 0.9]]))[0] == pytest.approx(h.level)
    # on the ring f = A (rho - r)^p with A from ``coefficients``
    (A,), = h.coefficients
    rho = 0.15
    assert h.pdf(np.array([[0.5 + rho, 0.5]]))[0] == pytest.approx(A * (rho - 0.1) ** 2)
    # level from the removed volume: 1 / (1 - pi r^2 - int ring deficit)
    ring = 2 * math.pi * (0.2**2 / 2 - 0.1**2 / 2) - 2 * math.pi * sum(
        ((t - 0.1) / 0.1) ** 2 * t * 1e-5 for t in np.arange(0.1, 0.2, 1e-5) + 0.5e-5
    )
    assert h.level == pytest.approx(1 / (1 - math.pi * 0.01 - ring), rel=1e-6)


def test_config_roundtrip():
    d = density_from_config({"kind": "product", "dimension": 2,
                             "marginals": [{"name": "power", "k": 2}, {"name": "uniform"}]})
    assert isinstance(d, ProductDensity)
    with pytest.raises(ValueError):
        density_from_config({"kind": "gaussian"})
    with pytest.raises(DimensionError):
        density_from_config({"kind": "product", "dimension": 3, "marginals": [{"name": "uniform"}]})


def test_h_transform_examples(unif2):
    x = np.array([0.3, 0.8])
    assert np.allclose(h_transform(unif2, x), x)
    tri = ProductDensity([Marginal.power(2.0), Marginal.power(2.0)])
    assert np.allclose(h_transform(tri, (0.5, 0.5)), (0.25, 0.25))
    with pytest.raises(TypeError):
        h_transform(RadialInteriorVanishing(), (0.1, 0.1))


@pytest.mark.parametrize(
    "density",
    [ProductDensity([Marginal.power(2.0), Marginal.beta(2.0, 5.0)]),
     ProductDensity([Marginal.truncated_normal(0.5, 0.2, 0.0, 1.0), Marginal.uniform(-1.0, 2.0)])],
    ids=["power_beta", "truncnorm_uniform"],
)
def test_h_transform_uniformises(density, rng):
    u = h_transform(density, density.sample(10_000, rng))
    for k in range(density.dim):
        assert stats.kstest(u[:, k], "uniform").pvalue > 0.01
