"""Rotationally symmetric translator profiles.

For u(x) = phi(|x|) the translator equation reduces to

    phi'' = (1 - phi'^2) * (C sqrt(1 - phi'^2) - 1 - (n - 1) phi' / r),

with phi(0) = phi'(0) = 0.  The slope increases strictly from 0 to the
light cone limit ctilde = sqrt(1 - 1/C^2) and the profile grows like

    phi(r) = ctilde r - ((n - 1) / C^2) log r + const + o(1).

Integration starts from the series

    phi'(r) = alpha r + beta r^3 + O(r^5),
    alpha = (C - 1)/n,  beta = -alpha^2 (C/2 + alpha) / (n + 2),

to step over the coordinate singularity at r = 0.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.interpolate import CubicHermiteSpline

from .errors import IntegrationError, RangeError
from .geometry import SolitonParams

SERIES_SWITCH_R = 1e-4


@dataclass
class AsymptoticFit:
    """Least squares fit phi ~ slope * r + logcoef * log r + offset."""

    slope: float
    logcoef: float
    offset: float
    window: tuple[float, float]
    rms_residual: float


@dataclass
class RadialProfile:
    """Profile samples (r, phi, phi') on the integrator's adaptive nodes."""

    r: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    params: SolitonParams
    fit: AsymptoticFit | None = None

    def __post_init__(self):
        self._spline = CubicHermiteSpline(self.r, self.phi, self.dphi, extrapolate=False)
        ddphi = _rhs_array(self.r, self.dphi, self.params)
        self._dspline = CubicHermiteSpline(self.r, self.dphi, ddphi, extrapolate=False)

    @property
    def r_max(self) -> float:
        return float(self.r[-1])

    def __call__(self, rr):
        out = self._spline(np.abs(rr))
        if np.any(~np.isfinite(np.atleast_1d(out))):
            raise RangeError(
                f"profile evaluated beyond r_max = {self.r_max:.6g}; extend the solve"
            )
        return out

    def slope(self, rr):
        out = self._dspline(np.abs(rr))
        if np.any(~np.isfinite(np.atleast_1d(out))):
            raise RangeError(
                f"profile slope beyond r_max = {self.r_max:.6g}; extend the solve"
            )
        return out

    @property
    def origin_curvature(self) -> float:
        """phi''(0) recovered from the series start, equals (C - 1)/n."""
        k = int(np.searchsorted(self.r, SERIES_SWITCH_R / 2.0))
        k = max(k, 1)
        return float(self.dphi[k] / self.r[k])

    def height_fn(self):
        """Radial height x -> phi(|x|) on (..., 2) point arrays."""

        def fn(pts):
            p = np.asarray(pts, dtype=float)
            return self(np.hypot(p[..., 0], p[..., 1]))

        return fn

    def save_csv(self, path):
        path = Path(path)
        with open(path, "w") as fh:
            fh.write("r,phi,dphi\n")
            for rr, ph, dp in zip(self.r, self.phi, self.dphi):
                fh.write(f"{rr:.17g},{ph:.17g},{dp:.17g}\n")
        return path


def _rhs(r, y, c, n):
    dphi = y[1]
    s2 = 1.0 - dphi * dphi
    if s2 <= 0.0:
        return [dphi, 0.0]
    drift = c * math.sqrt(s2) - 1.0
    if r > 0.0:
        drift -= (n - 1) * dphi / r
    return [dphi, s2 * drift]


def _rhs_array(r, dphi, params):
    s2 = np.clip(1.0 - dphi * dphi, 0.0, None)
    drift = params.c * np.sqrt(s2) - 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        corr = np.where(r > 0.0, (params.dim - 1) * dphi / r, 0.0)
    return s2 * (drift - corr)


def _series_coefficients(params):
    alpha = (params.c - 1.0) / params.dim
    beta = -alpha * alpha * (params.c / 2.0 + alpha) / (params.dim + 2.0)
    return alpha, beta


def solve_radial(
    params: SolitonParams,
    r_max: float,
    tol: float = 1e-10,
    fit_window: tuple[float, float] | None = None,
    max_step: float = 0.1,
) -> RadialProfile:
    """Integrate the radial profile out to r_max.

    Adaptive RK45 with relative tolerance tol after an analytic series
    start on [0, 1e-4].  When r_max >= 40 (or a window is given) the far
    field is fitted and attached to the profile.
    """
    if r_max <= 1.0:
        raise ValueError("r_max must exceed 1")
    alpha, beta = _series_coefficients(params)
    r0 = SERIES_SWITCH_R
    rs = np.linspace(0.0, r0, 5)
    phi_s = 0.5 * alpha * rs ** 2 + 0.25 * beta * rs ** 4
    dphi_s = alpha * rs + beta * rs ** 3

    def lightcone(r, y, *_args):
        return (1.0 - 1e-12) - y[1]

    lightcone.terminal = True

    sol = solve_ivp(
        _rhs,
        (r0, r_max),
        [phi_s[-1], dphi_s[-1]],
        method="RK45",
        rtol=tol,
        atol=tol * 1e-2,
        max_step=max_step,
        events=lightcone,
        args=(params.c, params.dim),
    )
    if not sol.success or sol.t[-1] < r_max:
        raise IntegrationError(
            f"radial integration stopped at r = {sol.t[-1]:.6g}: {sol.message}"
        )
    r = np.concatenate([rs[:-1], sol.t])
    phi = np.concatenate([phi_s[:-1], sol.y[0]])
    dphi = np.concatenate([dphi_s[:-1], sol.y[1]])

    if np.any(dphi < 0.0) or np.any(dphi[1:] >= params.ctilde):
        raise IntegrationError("profile slope left [0, ctilde); integration invalid")
    if np.any(np.diff(r) <= 0.0):
        keep = np.concatenate([[True], np.diff(r) > 0.0])
        r, phi, dphi = r[keep], phi[keep], dphi[keep]

    profile = RadialProfile(r, phi, dphi, params)
    if fit_window is None and r_max >= 40.0:
        fit_window = (max(10.0, 0.25 * r_max), r_max)
    if fit_window is not None:
        profile.fit = asymptotic_fit(profile, *fit_window)
    return profile


def asymptotic_fit(profile: RadialProfile, r1: float, r2: float) -> AsymptoticFit:
    """Fit phi ~ a r + b log r + c on the window [r1, r2], r1 >= 10."""
    if not (r2 > r1 >= 10.0):
        raise ValueError("fit window needs r2 > r1 >= 10")
    mask = (profile.r >= r1) & (profile.r <= r2)
    if int(mask.sum()) < 10:
        raise ValueError("fit window contains fewer than 10 profile nodes")
    r = profile.r[mask]
    y = profile.phi[mask]
    design = np.stack([r, np.log(r), np.ones_like(r)], axis=-1)
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    rms = float(np.sqrt(np.mean(resid ** 2)))
    return AsymptoticFit(
        slope=float(coef[0]),
        logcoef=float(coef[1]),
        offset=float(coef[2]),
        window=(float(r1), float(r2)),
        rms_residual=rms,
    )


def maximal_barrier_integral(hval: float, s: float, n: int) -> float:
    """Barrier height integral(0, s) h / sqrt(t^(2n-2) + h^2) dt.

    Strictly increasing in s and in h, bounded by s, and approaching s as
    h grows.  Adaptive quadrature at relative tolerance 1e-12.
    """
    if hval <= 0.0:
        raise ValueError("h must be positive")
    if s < 0.0:
        raise ValueError("s must be nonnegative")
    if n < 1:
        raise ValueError("n must be at least 1")
    if s == 0.0:
        return 0.0
    p = 2 * n - 2

    def integrand(t):
        return hval / math.sqrt(t ** p + hval * hval)

    val, err = quad(integrand, 0.0, s, epsabs=0.0, epsrel=1e-12, limit=200)
    return float(val)


def translated_radial(profile: RadialProfile, shift, offset: float):
    """Height function x -> offset + phi(|x + shift|).

    Any such translate solves the same equation.  Evaluation beyond the
    stored radius raises RangeError.
    """
    sh = np.asarray(shift, dtype=float)

    def fn(pts):
        p = np.asarray(pts, dtype=float)
        q = p + sh
        return offset + profile(np.hypot(q[..., 0], q[..., 1]))

    return fn


def save_fit_report(profile: RadialProfile, path):
    """JSON report of the fitted asymptotic coefficients."""
    if profile.fit is None:
        raise ValueError("profile has no asymptotic fit attached")
    f = profile.fit
    expected_log = -(profile.params.dim - 1) / profile.params.c ** 2
    report = {
        "C": profile.params.c,
        "n": profile.params.dim,
        "r_max": profile.r_max,
        "slope": f.slope,
        "logcoef": f.logcoef,
        "offset": f.offset,
        "window": list(f.window),
        "rms_residual": f.rms_residual,
        "ctilde": profile.params.ctilde,
        "expected_logcoef": expected_log,
    }
    with open(path, "w") as fh:
        json.dump(report, fh, indent=1)
    return Path(path)
