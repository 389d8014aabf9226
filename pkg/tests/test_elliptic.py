"""Dirichlet discretization and damped Newton solver.

Two exactness oracles anchor the discrete operator: planes with slope
magnitude ctilde solve the equation exactly (residual at rounding), and
the g = 0 disk problem must reproduce the radial profile translate
psi(r) - psi(R) to O(h^2).
"""

import math

import numpy as np
import pytest

import solitonlab as sl
import solitonlab.elliptic as ell
from solitonlab import (
    BoundarySpec,
    ConvexDomain,
    DirichletProblem,
    DiscretizationError,
    NotSpacelikeError,
    SolitonParams,
)
from solitonlab.geometry import CUT

PARAMS = SolitonParams(2.0, 2)


def disk_problem(radius=3.0, h=0.1, gval=0.0):
    return DirichletProblem(
        PARAMS, ConvexDomain.disk((0.0, 0.0), radius), BoundarySpec.const(gval), h=h
    )


def test_disk_active_count_tracks_area():
    dp = ell.discretize(disk_problem(4.0, 0.1))
    expect = math.pi * 1600.0
    assert abs(dp.n_active - expect) < 0.03 * expect


def test_aligned_square_has_no_cut_nodes():
    # h = 0.25 is binary exact, so lattice nodes land exactly on the
    # boundary and every boundary arm has a full cut fraction
    dom = ConvexDomain.polygon([(-2, -2), (2, -2), (2, 2), (-2, 2)])
    prob = DirichletProblem(PARAMS, dom, BoundarySpec.const(0.0), h=0.25)
    dp = ell.discretize(prob)
    assert int(np.sum(dp.grid.cls == CUT)) == 0
    assert np.all(dp.grid.theta[dp.grid.barm] == 1.0)


@pytest.mark.parametrize("ang", [0.0, 0.7, 2.1])
def test_characteristic_plane_is_discretely_exact(ang):
    # boundary data ctilde (cos a, sin a) . x is solved by the plane
    # itself: zero Hessian and C w - 1 = 0 cancel node by node
    ct = PARAMS.ctilde
    v = (ct * math.cos(ang), ct * math.sin(ang))
    dom = ConvexDomain.polygon([(-2, -2), (2, -2), (2, 2), (-2, 2)])
    prob = DirichletProblem(PARAMS, dom, BoundarySpec.linear(v), h=0.2)
    dp = ell.discretize(prob)
    field, rep = sl.newton_solve(dp)
    assert rep.converged
    x, y = dp.grid.points()
    exact = v[0] * x + v[1] * y
    act = dp.grid.active
    assert np.max(np.abs(field.values[act] - exact[act])) < 1e-10
    res, _ = ell.residual_vector(dp, field.values[act])
    assert np.max(np.abs(res)) < 1e-12


def test_disk_solution_matches_radial_profile():
    prof = sl.solve_radial(PARAMS, 10.0)
    dp = ell.discretize(disk_problem(3.0, 0.1))
    field, rep = sl.newton_solve(dp)
    assert rep.converged
    x, y = dp.grid.points()
    act = dp.grid.active
    oracle = prof(np.hypot(x[act], y[act])) - prof(3.0)
    assert np.max(np.abs(field.values[act] - oracle)) < 0.5 * 0.1 ** 2


def test_newton_report_and_quadratic_tail():
    dp = ell.discretize(disk_problem())
    field, rep = sl.newton_solve(dp)
    hist = rep.residual_history
    assert rep.converged and rep.iterations == len(hist) - 1
    assert rep.iterations <= 8
    assert rep.spacelike_margin > 0.0
    assert hist[-1] < dp.problem.tol
    # quadratic contraction on the last two steps
    assert hist[-1] <= 10.0 * hist[-2] ** 2
    assert hist[-2] <= 10.0 * hist[-3] ** 2


def test_default_initial_is_spacelike():
    dp = ell.discretize(disk_problem(3.0, 0.1, gval=1.0))
    u0 = dp.default_initial()
    assert ell._gradient_sq_max(dp, u0) < 0.98
    # kinked boundary data: the harmonic extension must still produce a
    # spacelike start and Newton must run them to convergence
    dom = ConvexDomain.polygon([(-2, -2), (2, -2), (2, 2), (-2, 2)])
    prob = DirichletProblem(
        PARAMS,
        dom,
        BoundarySpec.from_callable(lambda p: 0.5 * np.abs(p[..., 0])),
        h=0.25,
    )
    dpk = ell.discretize(prob)
    assert ell._gradient_sq_max(dpk, dpk.default_initial()) < 0.98
    _, rep = sl.newton_solve(dpk)
    assert rep.converged


def test_disconnected_sublevel_is_rejected():
    # min of two unit-disk bowls: two components at level 1
    def two_bowls(p):
        a = np.hypot(p[..., 0] + 2.0, p[..., 1])
        b = np.hypot(p[..., 0] - 2.0, p[..., 1])
        return np.minimum(a, b)

    dom = ConvexDomain.sublevel(two_bowls, 1.0, (-4, 4, -2, 2), validate=False)
    prob = DirichletProblem(PARAMS, dom, BoundarySpec.const(0.0), h=0.1)
    with pytest.raises(DiscretizationError):
        ell.discretize(prob)


def test_tiny_domain_is_rejected():
    with pytest.raises(DiscretizationError):
        ell.discretize(disk_problem(0.3, 0.1))


def test_nonconvex_polygon_is_rejected():
    with pytest.raises(ValueError):
        ConvexDomain.polygon([(0, 0), (2, 0), (1, 0.2), (1, 2)])


def test_steep_boundary_data_is_rejected():
    with pytest.raises(ValueError):
        BoundarySpec.linear((0.8, 0.8))
    prob = DirichletProblem(
        PARAMS,
        ConvexDomain.disk((0.0, 0.0), 3.0),
        BoundarySpec.from_callable(lambda p: 1.2 * np.abs(p[..., 0])),
        h=0.1,
    )
    with pytest.raises(ValueError):
        ell.discretize(prob)


def test_newton_rejects_lightlike_initial():
    dp = ell.discretize(disk_problem())
    x = dp.ops.pts[:, 0]
    with pytest.raises(NotSpacelikeError):
        sl.newton_solve(dp, initial=x.copy())


def test_comparison_check_orders_solutions():
    prof = sl.solve_radial(PARAMS, 10.0)
    dp = ell.discretize(disk_problem(3.0, 0.1))
    field, _ = sl.newton_solve(dp)
    lower = sl.translated_radial(prof, (0.0, 0.0), -prof(3.0) - 0.05)
    upper = sl.translated_radial(prof, (0.0, 0.0), -prof(3.0) + 0.05)
    rep = sl.comparison_check(field, lower, upper)
    assert rep.passed
    assert rep.lower_violation < 0.0 and rep.upper_violation < 0.0
    rep_bad = sl.comparison_check(field, upper, lower)
    assert not rep_bad.passed
    assert rep_bad.lower_violation == pytest.approx(0.05, abs=5e-3)


def test_gradient_bound_check():
    dp = ell.discretize(disk_problem())
    field, _ = sl.newton_solve(dp)
    rep = sl.gradient_bound_check(field, PARAMS)
    assert rep.passed
    assert rep.max_gradient <= PARAMS.ctilde + 5.0 * dp.grid.spacing
    # a plane steeper than ctilde + 5h must fail
    from solitonlab.geometry import Grid2, ScalarField

    g = Grid2.rectangle((-1.0, -1.0), 0.01, 201, 201)
    steep = ScalarField.from_function(g, lambda p: 0.95 * p[..., 0])
    assert not sl.gradient_bound_check(steep, PARAMS).passed


def test_jacobian_matches_directional_differences():
    dp = ell.discretize(disk_problem())
    field, _ = sl.newton_solve(dp)
    out = sl.jacobian_consistency(dp, field.values[dp.grid.active])
    assert len(out) == 10
    for d in out:
        assert 1.8 <= d["order"] <= 2.2
        assert d["err_lo"] < d["err_hi"]


def test_problem_json_roundtrip(tmp_path):
    prob = disk_problem(2.5, 0.2, gval=0.7)
    path = tmp_path / "problem.json"
    sl.problem_to_json(prob, path)
    back = sl.problem_from_json(path)
    assert back.params.c == prob.params.c
    assert back.h == prob.h and back.tol == prob.tol
    assert back.domain.descriptor() == prob.domain.descriptor()
    assert back.boundary.descriptor() == prob.boundary.descriptor()

    poly = DirichletProblem(
        PARAMS,
        ConvexDomain.polygon([(-1, -1), (1.5, -1), (0, 2)]),
        BoundarySpec.linear((0.2, -0.1), 0.4),
        h=0.1,
    )
    back = sl.problem_from_json(sl.problem_to_json(poly))
    assert back.domain.descriptor() == poly.domain.descriptor()
    assert back.boundary.descriptor() == poly.boundary.descriptor()


def test_snap_boundary_removes_cut_nodes():
    dp = ell.discretize(disk_problem(), snap_boundary=True)
    assert int(np.sum(dp.grid.cls == CUT)) == 0
    assert np.all(dp.grid.theta == 1.0)
    field, rep = sl.newton_solve(dp)
    assert rep.converged


def test_domain_crossing_fractions():
    dom = ConvexDomain.disk((0.0, 0.0), 4.0)
    th = dom.crossing(np.array([3.95, 0.0]), np.array([0.1, 0.0]))
    assert th == pytest.approx(0.5, abs=1e-10)
    assert dom.support((1.0, 0.0)) == pytest.approx(4.0)
    assert dom.inside(np.array([[3.99, 0.0], [4.01, 0.0]])).tolist() == [True, False]
