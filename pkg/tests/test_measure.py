import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nurgg.density import (
    ClassH,
    HolePatch,
    IntegrationError,
    Marginal,
    NormSpec,
    ProductDensity,
    QuadratureBudget,
    RadialEdgeVanishing,
    RadialInteriorVanishing,
    RadiusSolveError,
    UniformCube,
    ball_measure,
    cutoff_radius,
    has_closed_form,
    poisson_cutoff_radius,
    radii_for_mass,
    radius_for_mass,
)
from nurgg.density.measure import BallMassEvaluator, RayTables

LINF = NormSpec("inf", 2)
L2 = NormSpec(2, 2)
L1 = NormSpec(1, 2)
UNIF = UniformCube(2)
CI = RadialInteriorVanishing(2, 1.0)
CE = RadialEdgeVanishing(2, 0.5, 1.0)
PROD = ProductDensity([Marginal.power(2.0), Marginal.beta(2.0, 2.0)])
HOLE = ClassH([0, 0], [1, 1], [HolePatch((0.5, 0.5), 0.1, 0.25)])


def test_ball_measure_examples():
    assert ball_measure(UNIF, LINF, (0.5, 0.5), 0.1) == pytest.approx(0.04, abs=1e-15)
    assert ball_measure(UNIF, LINF, (0.0, 0.0), 0.1) == pytest.approx(0.01, abs=1e-15)
    assert ball_measure(CI, L2, (0.0, 0.0), 0.5) == pytest.approx(0.5, abs=1e-13)


def test_ball_measure_rejects_negative_radius():
    with pytest.raises(ValueError):
        ball_measure(UNIF, LINF, (0.5, 0.5), -0.1)


def test_radius_examples():
    assert radius_for_mass(UNIF, LINF, (0.5, 0.5), 0.04) == pytest.approx(0.1, rel=1e-9)
    assert radius_for_mass(CI, L2, (0.0, 0.0), 0.5) == pytest.approx(0.5, rel=1e-8)
    assert radius_for_mass(UNIF, LINF, (0.0, 0.0), 0.01) == pytest.approx(0.1, rel=1e-9)


def test_cutoff_radius_examples():
    r = cutoff_radius(UNIF, LINF, (0.5, 0.5), 1.0, 1e4)
    assert r == pytest.approx(0.0151743, abs=5e-8)
    assert r == pytest.approx(math.sqrt(math.log(1e4) / 1e4) / 2, rel=1e-9)
    r = poisson_cutoff_radius(UNIF, LINF, (0.5, 0.5), 1.0, 1e4)
    assert r == pytest.approx(math.sqrt((math.log(1e4) + 1) / 1e4) / 2, rel=1e-9)
    assert r == pytest.approx(0.0159768, abs=5e-8)


@pytest.mark.parametrize("c", [0.3, 1.0, 2.5])
@pytest.mark.parametrize("n", [1e3, 1e5])
def test_cutoff_closed_form_interior(c, n):
    x = (0.5, 0.5)
    expect = (c * math.log(n) / (n * LINF.theta_d)) ** 0.5
    assert cutoff_radius(UNIF, LINF, x, c, n) == pytest.approx(expect, rel=1e-9)


def test_beta_zero_equals_c_one():
    pts = np.random.default_rng(1).random((50, 2))
    from nurgg.density import cutoff_radii, poisson_cutoff_radii

    for dens, nm in ((UNIF, LINF), (CI, L2)):
        p = pts if dens is UNIF else pts - 0.5
        assert np.array_equal(cutoff_radii(dens, nm, p, 1.0, 1e4), poisson_cutoff_radii(dens, nm, p, 0.0, 1e4))


def test_beta_precondition():
    with pytest.raises(ValueError):
        poisson_cutoff_radius(UNIF, LINF, (0.5, 0.5), -1.0, 2)


def test_saturation_covers_support():
    r = radius_for_mass(UNIF, LINF, (0.2, 0.3), 1.0)
    assert r == pytest.approx(0.8, rel=1e-9)
    assert ball_measure(UNIF, LINF, (0.2, 0.3), r) == pytest.approx(1.0)


def test_target_out_of_range():
    with pytest.raises(ValueError):
        radius_for_mass(UNIF, LINF, (0.5, 0.5), 1.5)
    with pytest.raises(ValueError):
        radius_for_mass(UNIF, LINF, (0.5, 0.5), 0.0)


def test_unreachable_mass_from_outside():
    # only the part of the square inside B(x, r) counts, and r is capped by the reach radius
    with pytest.raises(RadiusSolveError):
        radii_for_mass(UNIF, LINF, np.array([[0.5, 0.5], [5.0, 5.0]]), [0.1, 1.0 + 1e-13], tol=0.0)


def test_c_int_antiderivative_at_origin():
    # F(B(0, r)) = 3 r^2 - 2 r^3 for r <= 1
    for r in np.linspace(0.01, 1.0, 20):
        assert ball_measure(CI, L2, (0.0, 0.0), r) == pytest.approx(3 * r**2 - 2 * r**3, abs=1e-12)


# independent two-dimensional polar quadrature (scipy.dblquad, tight tolerances)
C_INT_OFF_CENTRE = [
    ((0.3, 0.2), 0.25, 0.11574305938843982),
    ((0.6, 0.0), 0.5, 0.26171110691425836),
    ((0.0, 0.9), 0.3, 0.03088921503221307),
    ((0.5, 0.5), 1.2, 0.840551243974072),
]


@pytest.mark.parametrize("x,r,expect", C_INT_OFF_CENTRE)
def test_c_int_off_centre_against_quadrature(x, r, expect):
    assert ball_measure(CI, L2, x, r) == pytest.approx(expect, abs=1e-8)


def test_c_edge_inner_ball_has_no_mass():
    assert ball_measure(CE, L2, (0.0, 0.0), 0.5) == 0.0
    assert ball_measure(CE, L2, (0.0, 0.0), 1.0) == pytest.approx(1.0, abs=1e-12)


def test_flat_region_returns_smallest_radius():
    # mass of B(0, r) under C_E stays 0 on [0, 0.5]; any positive target lies beyond
    t = 1e-6
    r = radius_for_mass(CE, L2, (0.0, 0.0), t)
    assert r > 0.5
    assert ball_measure(CE, L2, (0.0, 0.0), r) == pytest.approx(t, rel=1e-7)
    assert ball_measure(CE, L2, (0.0, 0.0), r * (1 - 1e-6)) < t


def test_closed_form_flags():
    assert has_closed_form(UNIF, LINF)
    assert has_closed_form(CI, L2)
    assert has_closed_form(PROD, LINF)
    assert not has_closed_form(UNIF, L2)
    assert not has_closed_form(HOLE, L2)


CASES = [
    (UNIF, LINF), (UNIF, L2), (UNIF, L1), (CI, L2), (CI, LINF), (CE, L2), (CE, L1),
    (PROD, LINF), (PROD, L2), (HOLE, L2), (HOLE, LINF),
]


def _support_point(density, u):
    x = density.lower + (density.upper - density.lower) * np.asarray(u)
    return x


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(range(len(CASES))), st.tuples(st.floats(0.05, 0.95), st.floats(0.05, 0.95)),
       st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_monotone_in_r(case, u, a, b):
    density, norm = CASES[case]
    x = _support_point(density, u)
    r1, r2 = sorted((a, b))
    ev = BallMassEvaluator(density, norm, x[None, :])
    m1, m2 = ev(np.array([r1, r2]), np.array([0, 0]))
    assert 0.0 <= m1 <= m2 + 1e-15
    assert m2 <= 1.0 + 1e-9


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(range(len(CASES))), st.tuples(st.floats(0.05, 0.95), st.floats(0.05, 0.95)),
       st.floats(1e-4, 0.9))
def test_inversion_residual(case, u, t):
    density, norm = CASES[case]
    x = _support_point(density, u)
    closed = has_closed_form(density, norm)
    tol = (1e-8 if closed else 1e-5) * t
    r, resid = radii_for_mass(density, norm, x[None, :], t, return_residual=True)
    ev = BallMassEvaluator(density, norm, x[None, :])
    assert abs(ev(r)[0] - t) <= tol
    assert resid[0] <= tol


@pytest.mark.parametrize("density,norm", [(UNIF, LINF), (CI, L2), (CE, L2), (PROD, LINF)])
def test_ray_tables_against_closed_form(density, norm, rng):
    x = density.lower + (density.upper - density.lower) * rng.random((30, 2))
    r = 0.02 + 0.5 * rng.random(30)
    exact = density.closed_ball_mass(norm, x, r)
    tabs = RayTables(density, norm, x)
    approx, err = tabs.mass(r, np.arange(30))
    # kinks where the ball leaves the support cap the angular accuracy near 1e-3
    assert np.max(np.abs(approx - exact)) < QuadratureBudget().max_error
    assert np.all(np.isfinite(err)) and np.all(err >= 0)


def test_ray_tables_error_estimate_smooth_case():
    # balls well inside the support: the two-rule difference bounds the error
    x = np.array([[0.1, 0.0], [0.0, -0.2], [0.15, 0.15]])
    r = np.array([0.3, 0.25, 0.4])
    exact = CI.closed_ball_mass(L2, x, r)
    approx, err = RayTables(CI, L2, x, QuadratureBudget(directions=16)).mass(r, np.arange(3))
    assert np.all(np.abs(approx - exact) <= err + 1e-7)


def test_ray_tables_uniform_l2_inside():
    x = np.array([[0.5, 0.5], [0.3, 0.6]])
    r = np.array([0.1, 0.2])
    approx, _ = RayTables(UNIF, L2, x).mass(r, np.arange(2))
    assert np.allclose(approx, math.pi * r**2, rtol=2e-4)


def test_integration_error_reported():
    tight = QuadratureBudget(directions=8, max_error=1e-12)
    with pytest.raises(IntegrationError) as info:
        ball_measure(HOLE, L2, (0.45, 0.5), 0.2, budget=tight)
    assert info.value.achieved_error > 1e-12


def test_stack_of_centres():
    x = np.array([[0.5, 0.5], [0.0, 0.0]])
    assert np.allclose(ball_measure(UNIF, LINF, x, 0.1), [0.04, 0.01])
