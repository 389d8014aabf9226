"""Envelope construction, exhaustion, blow-down and the splitting lift.

Closed-form anchors: a constant angular function collapses both
envelopes onto the radial translate exactly (all plane shifts vanish),
a plane u = s x1 blows down to the cone s r cos(phi) with
|DV| = s identically, and the lift s x2 + lam^2 phi(x1 / lam) solves
the full two dimensional equation when the reduced profile does.
"""

import math

import numpy as np
import pytest

import solitonlab as sl
from solitonlab import (
    BadCurvatureBoundError,
    NotConvexError,
    SolitonParams,
    SphereFunction,
)
from solitonlab.geometry import Grid2, ScalarField

PARAMS = SolitonParams(2.0, 2)
CT = PARAMS.ctilde


@pytest.fixture(scope="module")
def profile():
    return sl.solve_radial(PARAMS, 60.0)


def test_sphere_cosine_derivatives():
    sph = SphereFunction.cosine(CT, 0.3, 3)
    th = np.linspace(0.0, 2.0 * np.pi, 17)
    assert np.max(np.abs(sph.value(th) - 0.3 * np.cos(3 * th))) < 1e-12
    assert np.max(np.abs(sph.value(th, 1) + 0.9 * np.sin(3 * th))) < 1e-10
    assert np.max(np.abs(sph.value(th, 2) + 2.7 * np.cos(3 * th))) < 1e-9


def test_sphere_from_csv_roundtrip(tmp_path):
    sph = SphereFunction.cosine(CT, 0.2, 2, n_angles=128)
    path = tmp_path / "f.csv"
    th = sph.angles
    np.savetxt(path, np.column_stack([th, sph.values]), delimiter=",",
               header="theta,f", comments="")
    back = SphereFunction.from_csv(path, CT, n_angles=128)
    assert np.max(np.abs(back.values - sph.values)) < 1e-10


def test_curvature_ratio_and_m_bound():
    # for amp cos(k theta) the small-separation ratio is amp k^2 / (2 ct^2)
    sph = SphereFunction.cosine(CT, 0.3, 3)
    expect = 0.3 * 9.0 / (2.0 * CT * CT)
    assert sph.curvature_ratio() == pytest.approx(expect, abs=5e-3)
    assert sph.m_bound() == pytest.approx(1.5 * sph.curvature_ratio())
    sph.validate_m(sph.m_bound())
    with pytest.raises(BadCurvatureBoundError):
        sph.validate_m(0.5 * sph.curvature_ratio())


def test_supporting_plane_families():
    sph = SphereFunction.cosine(CT, 0.3, 3, n_angles=64)
    m = sph.m_bound()
    planes = sl.supporting_planes(sph, m)
    y = planes["y"]
    assert np.max(np.abs(planes["p_lo"] - planes["p_hi"] - 4.0 * m * CT * y)) < 1e-12
    for side in ("lo", "hi"):
        p = planes["p_" + side]
        o = planes["o_" + side]
        assert np.max(np.abs(o - (planes["f"] - CT * np.sum(p * y, axis=-1)))) < 1e-12


def test_constant_sphere_collapses_envelopes(profile):
    envs = sl.envelopes(profile, SphereFunction.constant(CT, 0.7))
    rng = np.random.default_rng(4)
    pts = rng.uniform(-20.0, 20.0, size=(200, 2))
    radial = profile(np.hypot(pts[:, 0], pts[:, 1])) + 0.7
    assert np.max(np.abs(envs.q1(pts) - radial)) < 1e-12
    assert np.max(np.abs(envs.q2(pts) - radial)) < 1e-12


def test_envelopes_sandwich_and_pinch(profile):
    envs = sl.envelopes(profile, SphereFunction.cosine(CT, 0.3, 3))
    rng = np.random.default_rng(9)
    pts = rng.uniform(-25.0, 25.0, size=(400, 2))
    assert np.min(envs.q2(pts) - envs.q1(pts)) >= 0.0
    gaps = [sl.sandwich_gap(envs, r) for r in (5.0, 10.0, 20.0, 40.0)]
    assert np.all(np.diff(gaps) < 0.0)


def test_lower_envelope_is_convex(profile):
    envs = sl.envelopes(profile, SphereFunction.cosine(CT, 0.3, 3))
    rng = np.random.default_rng(13)
    a = rng.uniform(-20.0, 20.0, size=(100, 2))
    b = rng.uniform(-20.0, 20.0, size=(100, 2))
    lam = rng.uniform(0.0, 1.0, size=100)
    mid = lam[:, None] * a + (1.0 - lam[:, None]) * b
    bound = lam * envs.q1(a) + (1.0 - lam) * envs.q1(b)
    assert np.max(envs.q1(mid) - bound) < 1e-10


def test_envelopes_reject_mismatched_ctilde(profile):
    with pytest.raises(ValueError):
        sl.envelopes(profile, SphereFunction.cosine(0.5, 0.3, 3))


def test_exhaustion_smoke(profile):
    sph = SphereFunction.cosine(CT, 0.2, 2)
    res = sl.exhaustion_construct(
        profile, sph, levels=(5.0, 10.0), h=0.25, compact_radius=3.0
    )
    assert [r.converged for r in res.reports] == [True, True]
    assert len(res.cauchy_gaps) == 1
    assert res.monotone_margins[0] > -1e-8
    assert max(res.sandwich_violations) <= 1e-2 * 1.25
    # final window is a clean rectangle field around the origin
    assert np.all(np.isfinite(res.final.values))
    assert abs(res.final.grid.origin[0]) <= 3.0
    # the solved graphs are steeper than ctilde nowhere (up to 5h)
    rep = sl.gradient_bound_check(res.solutions[-1], PARAMS)
    assert rep.passed


def test_exhaustion_rejects_bad_levels(profile):
    sph = SphereFunction.cosine(CT, 0.2, 2)
    with pytest.raises(ValueError):
        sl.exhaustion_construct(profile, sph, levels=(5.0,))
    with pytest.raises(ValueError):
        sl.exhaustion_construct(profile, sph, levels=(10.0, 5.0))


def test_blowdown_of_plane_is_exact():
    cone = sl.blowdown(lambda p: 0.5 * p[..., 0], n_dirs=180)
    expect = 0.5 * cone.directions[:, 0]
    assert np.max(np.abs(cone.values - expect)) < 1e-12
    rep = sl.eikonal_check(cone, 0.5)
    # angular derivative by central differences: O(dphi^2) floor
    assert rep.passed and rep.max_rel_error < 1e-3
    assert rep.excluded_fraction == 0.0


def test_blowdown_of_radial_profile(profile):
    cone = sl.blowdown(profile.height_fn())
    assert np.max(np.abs(cone.values - CT)) < 2e-3
    assert sl.eikonal_check(cone, CT).passed
    # quotients grow toward the cone
    assert np.all(cone.quotients[:, -1] >= cone.quotients[:, 0])


def test_blowdown_of_field_source(profile):
    g = Grid2.rectangle((-30.0, -30.0), 0.25, 241, 241)
    f = ScalarField.from_function(
        g, lambda p: profile(np.hypot(p[..., 0], p[..., 1]))
    )
    cone = sl.blowdown(f)
    assert cone.heights[-1] <= 30.0
    assert sl.eikonal_check(cone, CT).passed


def test_blowdown_rejects_sublinear_growth():
    with pytest.raises(NotConvexError):
        sl.blowdown(lambda p: np.log1p(np.hypot(p[..., 0], p[..., 1])))


def test_blowdown_validates_heights():
    fn = lambda p: 0.5 * p[..., 0]
    with pytest.raises(ValueError):
        sl.blowdown(fn, heights=[1.0, 2.0])
    with pytest.raises(ValueError):
        sl.blowdown(fn, heights=[0.0, 1.0, 2.0])


def test_eikonal_kink_filter_excludes_cone_edges():
    cone = sl.blowdown(lambda p: 0.5 * np.abs(p[..., 0]), n_dirs=360)
    rep = sl.eikonal_check(cone, 0.5)
    assert rep.excluded_fraction > 0.0
    assert rep.passed


def test_split_lift_solves_full_equation():
    red = sl.solve_radial(SolitonParams(1.6, 1), 5.0)
    lift = sl.split_lift(red, 0.6, axis=1)
    assert lift.params.c == pytest.approx(2.0, abs=1e-12)
    assert lift.lam == pytest.approx(0.8)
    h = 0.05
    g = Grid2.rectangle((-1.0, -1.0), h, 41, 41)
    f = ScalarField.from_function(g, lift)
    res = sl.residual(f, lift.params)
    assert np.nanmax(np.abs(res.values)) < 0.5 * h * h
    # exact affinity in the lifted direction
    rng = np.random.default_rng(21)
    pts = rng.uniform(-1.0, 1.0, size=(50, 2))
    shift = np.array([0.0, 0.37])
    diff = lift(pts + shift) - lift(pts) - 0.6 * 0.37
    assert np.max(np.abs(diff)) < 1e-13


def test_split_lift_guards(profile):
    red = sl.solve_radial(SolitonParams(1.6, 1), 5.0)
    with pytest.raises(ValueError):
        sl.split_lift(profile, 0.6)
    with pytest.raises(ValueError):
        sl.split_lift(red, 1.0)


def test_angular_std_of_plane():
    std = sl.angular_std(lambda p: 0.5 * p[..., 0], 2.0, n_angles=720)
    assert std == pytest.approx(0.5 * 2.0 / math.sqrt(2.0), rel=1e-3)
