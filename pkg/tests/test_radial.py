"""Radial profile: independent integrator oracle, asymptotics, barriers.

The oracle is a classic fixed-step RK4 march of

    phi'' = (1 - phi'^2) (C sqrt(1 - phi'^2) - 1 - (n-1) phi'/r)

starting at r0 = 0.01 from the quadratic series phi ~ alpha r^2 / 2,
alpha = (C-1)/n.  At r0 the quartic correction moves phi' by < 1e-7, so
the oracle does not lean on the package's own series coefficients.
"""

import math

import numpy as np
import pytest

import solitonlab as sl
from solitonlab import IntegrationError, RangeError, SolitonParams


def rk4_profile(c, n, r_end, step=1e-3):
    alpha = (c - 1.0) / n
    beta = -alpha * alpha * (c / 2.0 + alpha) / (n + 2.0)
    r = 0.01
    y = np.array(
        [0.5 * alpha * r * r + 0.25 * beta * r ** 4, alpha * r + beta * r ** 3]
    )

    def f(r, y):
        dphi = y[1]
        s2 = 1.0 - dphi * dphi
        return np.array(
            [dphi, s2 * (c * math.sqrt(s2) - 1.0 - (n - 1) * dphi / r)]
        )

    for _ in range(int(round((r_end - r) / step))):
        k1 = f(r, y)
        k2 = f(r + 0.5 * step, y + 0.5 * step * k1)
        k3 = f(r + 0.5 * step, y + 0.5 * step * k2)
        k4 = f(r + step, y + step * k3)
        y = y + step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        r += step
    return y


@pytest.mark.parametrize("c,n", [(2.0, 2), (3.0, 3), (1.5, 1)])
def test_profile_matches_rk4_oracle(c, n):
    prof = sl.solve_radial(SolitonParams(c, n), 10.0)
    y = rk4_profile(c, n, 5.0)
    assert abs(prof(5.0) - y[0]) < 1e-7
    assert abs(prof.slope(5.0) - y[1]) < 1e-6


@pytest.mark.parametrize("c,n", [(2.0, 2), (3.0, 3), (1.5, 1)])
def test_origin_curvature(c, n):
    prof = sl.solve_radial(SolitonParams(c, n), 5.0)
    assert prof.origin_curvature == pytest.approx((c - 1.0) / n, abs=1e-6)


def test_profile_satisfies_ode_pointwise():
    c, n = 2.0, 2
    prof = sl.solve_radial(SolitonParams(c, n), 10.0)
    e = 1e-4
    for r in (0.5, 1.0, 2.0, 5.0):
        lhs = (prof.slope(r + e) - prof.slope(r - e)) / (2.0 * e)
        dphi = prof.slope(r)
        s2 = 1.0 - dphi * dphi
        rhs = s2 * (c * math.sqrt(s2) - 1.0 - (n - 1) * dphi / r)
        assert lhs == pytest.approx(rhs, abs=1e-6)


def test_profile_is_convex_and_subluminal():
    prof = sl.solve_radial(SolitonParams(2.0, 2), 40.0)
    assert np.all(np.diff(prof.dphi) > -1e-12)
    assert prof.dphi[0] == 0.0
    assert np.all(prof.dphi < prof.params.ctilde)
    assert np.all(prof.phi >= -1e-15)


def test_asymptotic_fit_far_field():
    params = SolitonParams(2.0, 2)
    prof = sl.solve_radial(params, 120.0)
    assert prof.fit is not None
    assert abs(prof.fit.slope - params.ctilde) < 1e-3
    assert prof.fit.logcoef == pytest.approx(-0.25, abs=0.03)
    assert prof.fit.rms_residual < 1e-3


def test_fit_window_validation():
    prof = sl.solve_radial(SolitonParams(2.0, 2), 30.0)
    with pytest.raises(ValueError):
        sl.asymptotic_fit(prof, 5.0, 20.0)
    with pytest.raises(ValueError):
        sl.asymptotic_fit(prof, 20.0, 15.0)


def test_barrier_integral_closed_forms():
    # n = 1: the integrand is the constant hval / sqrt(1 + hval^2)
    for hval, s in [(0.5, 1.0), (1.0, 2.0), (3.0, 0.7)]:
        exact = s * hval / math.sqrt(1.0 + hval * hval)
        assert sl.maximal_barrier_integral(hval, s, 1) == pytest.approx(
            exact, abs=1e-12
        )
    # n = 2, hval = s = 1: integral of dt / sqrt(t^2 + 1) = asinh(1)
    assert sl.maximal_barrier_integral(1.0, 1.0, 2) == pytest.approx(
        math.log(1.0 + math.sqrt(2.0)), abs=1e-10
    )
    # large hval limit: the integrand tends to 1, so the value tends to s
    assert sl.maximal_barrier_integral(1e8, 2.0, 3) == pytest.approx(2.0, abs=1e-6)


def test_barrier_integral_monotone():
    vals_s = [sl.maximal_barrier_integral(1.0, s, 2) for s in (0.5, 1.0, 2.0, 4.0)]
    assert np.all(np.diff(vals_s) > 0.0)
    vals_h = [sl.maximal_barrier_integral(h, 1.0, 2) for h in (0.5, 1.0, 2.0, 4.0)]
    assert np.all(np.diff(vals_h) > 0.0)


def test_translated_radial_matches_direct_evaluation():
    prof = sl.solve_radial(SolitonParams(2.0, 2), 20.0)
    fn = sl.translated_radial(prof, (1.0, -2.0), 3.5)
    rng = np.random.default_rng(2)
    pts = rng.uniform(-3.0, 3.0, size=(50, 2))
    rr = np.hypot(pts[:, 0] + 1.0, pts[:, 1] - 2.0)
    assert np.max(np.abs(fn(pts) - (prof(rr) + 3.5))) < 1e-12


def test_profile_range_errors():
    prof = sl.solve_radial(SolitonParams(2.0, 2), 5.0)
    with pytest.raises(RangeError):
        prof(5.5)
    with pytest.raises(RangeError):
        prof.slope(np.array([1.0, 6.0]))
    # negative radii are folded onto |r|
    assert prof(-1.0) == prof(1.0)


def test_solve_radial_argument_guards():
    with pytest.raises(ValueError):
        sl.solve_radial(SolitonParams(2.0, 2), 0.5)
    with pytest.raises(ValueError):
        SolitonParams(1.0, 2)
    with pytest.raises(ValueError):
        SolitonParams(2.0, 0)


def test_profile_csv_and_fit_report(tmp_path):
    prof = sl.solve_radial(SolitonParams(2.0, 2), 50.0)
    csv = tmp_path / "profile.csv"
    prof.save_csv(csv)
    data = np.loadtxt(csv, delimiter=",", skiprows=1)
    assert data.shape[1] == 3
    assert data[0, 0] == 0.0 and data[-1, 0] == pytest.approx(50.0)
    report = tmp_path / "fit.json"
    sl.radial.save_fit_report(prof, report)
    import json

    doc = json.loads(report.read_text())
    assert doc["slope"] == pytest.approx(prof.fit.slope)
    assert doc["logcoef"] == pytest.approx(prof.fit.logcoef)
