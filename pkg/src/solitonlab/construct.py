"""Entire translators from prescribed boundary data at infinity.

An angular function f on the circle of radius ctilde, together with a
curvature bound M for

    |f(ct x) - f(ct y) - Df(ct y) . (ct x - ct y)| <= M ct^2 |x - y|^2,

generates two families of shifted radial solitons

    z_i(x) = f(ct y) - p_i . (ct y) + psi(|x + p_i|),
    p_1 = Df(ct y) + 2 M ct y,   p_2 = Df(ct y) - 2 M ct y.

Their upper/lower envelopes q1 = max z_1, q2 = min z_2 trap every
solution with the same data at infinity.  Solving Dirichlet problems on
the exhaustion G_m = {q1 < m} with boundary value m gives a monotone
family u_m whose limit is entire; blowing down recovers the cone
ct |x| and the eikonal relation |DV|^2 = V^2 + V'^2 = ct^2 on the circle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as _dfield

import numpy as np

from .errors import (
    BadCurvatureBoundError,
    ConstructionFailureError,
    NotConvexError,
    RangeError,
)
from .geometry import Grid2, ScalarField, SolitonParams
from .elliptic import (
    BoundarySpec,
    ConvexDomain,
    DirichletProblem,
    comparison_check,
    discretize,
    newton_solve,
)
from .radial import RadialProfile

_CHUNK = 8192


# ---------------------------------------------------------------------------
# angular data on the circle of radius ctilde


@dataclass
class SphereFunction:
    """Periodic samples of f at angles 2 pi k / K with spectral evaluation."""

    ctilde: float
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or self.values.size < 8:
            raise ValueError("need at least 8 angular samples")
        if not (0.0 < self.ctilde < 1.0):
            raise ValueError("ctilde must lie in (0, 1)")
        k = self.values.size
        coef = np.fft.rfft(self.values)
        cos_c = 2.0 * coef.real / k
        sin_c = -2.0 * coef.imag / k
        cos_c[0] *= 0.5
        if k % 2 == 0:
            cos_c[-1] *= 0.5
        self._cos = cos_c
        self._sin = sin_c
        self._modes = np.arange(cos_c.size, dtype=float)

    @property
    def n_angles(self):
        return self.values.size

    @property
    def angles(self):
        return 2.0 * np.pi * np.arange(self.values.size) / self.values.size

    @classmethod
    def constant(cls, ctilde, value=0.0, n_angles=256):
        return cls(ctilde, np.full(n_angles, float(value)))

    @classmethod
    def cosine(cls, ctilde, amplitude, frequency=1, n_angles=256):
        th = 2.0 * np.pi * np.arange(n_angles) / n_angles
        return cls(ctilde, amplitude * np.cos(frequency * th))

    @classmethod
    def from_callable(cls, ctilde, fn, n_angles=256):
        th = 2.0 * np.pi * np.arange(n_angles) / n_angles
        return cls(ctilde, np.asarray(fn(th), dtype=float))

    @classmethod
    def from_csv(cls, path, ctilde, n_angles=None):
        """Rows theta,value at arbitrary angles, resampled periodically."""
        raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        th = np.mod(raw[:, 0], 2.0 * np.pi)
        order = np.argsort(th)
        th, vals = th[order], raw[order, 1]
        k = n_angles or max(256, 4 * th.size)
        grid = 2.0 * np.pi * np.arange(k) / k
        out = np.interp(grid, th, vals, period=2.0 * np.pi)
        return cls(ctilde, out)

    def value(self, theta, order=0):
        """f or its angular derivative, exact on the sampled band."""
        th = np.asarray(theta, dtype=float)
        ph = th[..., None] * self._modes + 0.5 * np.pi * order
        amp = self._modes ** order if order else np.ones_like(self._modes)
        return np.sum(amp * (self._cos * np.cos(ph) + self._sin * np.sin(ph)), axis=-1)

    def curvature_ratio(self, n_sample=360):
        """Sampled sup of |f(ct x) - f(ct y) - Df(ct y).(ct x - ct y)| over
        ct^2 |x - y|^2, the smallest admissible M up to sampling."""
        k = min(n_sample, 720)
        th = 2.0 * np.pi * np.arange(k) / k
        f = self.value(th)
        fp = self.value(th, order=1)
        dth = th[None, :] - th[:, None]
        lhs = np.abs(f[None, :] - f[:, None] - fp[:, None] * np.sin(dth))
        den = 4.0 * self.ctilde ** 2 * np.sin(0.5 * dth) ** 2
        mask = den > 1e-14
        if not np.any(mask):
            return 0.0
        return float(np.max(lhs[mask] / den[mask]))

    def m_bound(self, safety=1.5):
        return safety * self.curvature_ratio()

    def validate_m(self, m, n_sample=360):
        ratio = self.curvature_ratio(n_sample)
        if ratio > m * (1.0 + 1e-6) + 1e-12:
            raise BadCurvatureBoundError(
                f"curvature bound M = {m:.6g} violated: sampled ratio {ratio:.6g}"
            )
        return ratio


# ---------------------------------------------------------------------------
# supporting planes and envelopes


@dataclass
class Envelopes:
    """Lower/upper envelopes of shifted radial solitons.

    q1 is a max of convex functions (hence convex), q2 a min of the
    mirrored family, and q1 <= u <= q2 for every translator with the
    same angular data.  Shifts stay raw: for f constant both envelopes
    collapse to psi(|x|) + const exactly.
    """

    profile: RadialProfile
    sphere: SphereFunction
    m_bound: float
    shifts_lo: np.ndarray
    shifts_hi: np.ndarray
    offsets_lo: np.ndarray
    offsets_hi: np.ndarray

    @property
    def n_planes(self):
        return self.shifts_lo.shape[0]

    @property
    def y_samples(self):
        th = self.sphere.angles
        return self.sphere.ctilde * np.stack([np.cos(th), np.sin(th)], axis=-1)

    @property
    def max_shift(self):
        return float(
            max(
                np.max(np.hypot(self.shifts_lo[:, 0], self.shifts_lo[:, 1])),
                np.max(np.hypot(self.shifts_hi[:, 0], self.shifts_hi[:, 1])),
            )
        )

    @property
    def r_safe(self):
        """Largest |x| the envelopes accept before the profile runs out."""
        return self.profile.r_max - self.max_shift - 1e-9

    def _eval(self, pts, shifts, offsets, lower):
        # beyond the solved range the profile is extended linearly with
        # its terminal slope: still convex and below the true profile,
        # so sublevel classification of far away corners stays sound.
        rmax = self.profile.r_max
        send = self.profile.slope(rmax)
        p = np.asarray(pts, dtype=float)
        lead = p.shape[:-1]
        flat = p.reshape(-1, 2)
        out = np.empty(flat.shape[0])
        for s in range(0, flat.shape[0], _CHUNK):
            blk = flat[s : s + _CHUNK]
            d = np.hypot(
                blk[:, None, 0] + shifts[None, :, 0],
                blk[:, None, 1] + shifts[None, :, 1],
            )
            over = np.maximum(d - rmax, 0.0)
            z = self.profile(np.minimum(d, rmax)) + send * over + offsets[None, :]
            out[s : s + _CHUNK] = z.max(axis=1) if lower else z.min(axis=1)
        return out.reshape(lead)

    def q1(self, pts):
        return self._eval(pts, self.shifts_lo, self.offsets_lo, lower=True)

    def q2(self, pts):
        return self._eval(pts, self.shifts_hi, self.offsets_hi, lower=False)


def supporting_planes(sphere: SphereFunction, m_bound: float):
    """Shift vectors p_i and plane offsets for each sampled direction."""
    ct = sphere.ctilde
    th = sphere.angles
    y = np.stack([np.cos(th), np.sin(th)], axis=-1)
    tau = np.stack([-np.sin(th), np.cos(th)], axis=-1)
    f = sphere.values
    df = (sphere.value(th, order=1) / ct)[:, None] * tau
    p_lo = df + 2.0 * m_bound * ct * y
    p_hi = df - 2.0 * m_bound * ct * y
    o_lo = f - ct * np.sum(p_lo * y, axis=-1)
    o_hi = f - ct * np.sum(p_hi * y, axis=-1)
    return {"y": y, "f": f, "df": df, "p_lo": p_lo, "p_hi": p_hi, "o_lo": o_lo, "o_hi": o_hi}


def envelopes(profile: RadialProfile, sphere: SphereFunction, m_bound=None) -> Envelopes:
    if abs(profile.params.ctilde - sphere.ctilde) > 1e-12:
        raise ValueError(
            "profile and sphere function disagree on ctilde: "
            f"{profile.params.ctilde!r} vs {sphere.ctilde!r}"
        )
    if m_bound is None:
        m_bound = sphere.m_bound()
    sphere.validate_m(m_bound)
    pl = supporting_planes(sphere, m_bound)
    return Envelopes(
        profile=profile,
        sphere=sphere,
        m_bound=float(m_bound),
        shifts_lo=pl["p_lo"],
        shifts_hi=pl["p_hi"],
        offsets_lo=pl["o_lo"],
        offsets_hi=pl["o_hi"],
    )


def circle_samples(fn, radius, n_angles=360):
    th = 2.0 * np.pi * np.arange(n_angles) / n_angles
    pts = radius * np.stack([np.cos(th), np.sin(th)], axis=-1)
    return th, np.asarray(fn(pts), dtype=float)


def angular_std(fn, radius, n_angles=360):
    _, vals = circle_samples(fn, radius, n_angles)
    return float(np.std(vals))


def sandwich_gap(envs: Envelopes, radius, n_angles=360):
    """Max of q2 - q1 on the circle; decreases as the envelopes pinch."""
    _, lo = circle_samples(envs.q1, radius, n_angles)
    _, hi = circle_samples(envs.q2, radius, n_angles)
    return float(np.max(hi - lo))


def deviation_from_radial(fn, profile: RadialProfile, radius, n_angles=360):
    """u(r, phi) - psi(r) on a circle; tends to the angular data f."""
    _, vals = circle_samples(fn, radius, n_angles)
    return vals - profile(radius)


# ---------------------------------------------------------------------------
# exhaustion


@dataclass
class ExhaustionResult:
    levels: list
    solutions: list
    reports: list
    cauchy_gaps: list
    monotone_margins: list
    sandwich_violations: list
    final: ScalarField
    compact_radius: float
    envelopes: Envelopes

    @property
    def params(self):
        return self.envelopes.profile.params


def _ray_radius(fn, level, direction, r_cap):
    d = np.asarray(direction, dtype=float)
    lo, hi = 0.0, 1.0
    while fn(hi * d[None, :])[0] < level:
        lo, hi = hi, 2.0 * hi
        if hi > r_cap:
            raise ConstructionFailureError(
                f"sublevel {{q1 < {level}}} is not contained in the profile range "
                f"(|x| <= {r_cap:.3g}); extend r_max",
                level=level,
            )
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if fn(mid * d[None, :])[0] < level:
            lo = mid
        else:
            hi = mid
    return hi


def _level_domain(envs: Envelopes, level, h):
    if envs.q1(np.zeros((1, 2)))[0] >= level:
        raise ConstructionFailureError(
            f"exhaustion level {level} does not contain the origin", level=level
        )
    r_cap = envs.r_safe
    rr = max(
        _ray_radius(envs.q1, level, (math.cos(a), math.sin(a)), r_cap)
        for a in np.linspace(0.0, 2.0 * np.pi, 16, endpoint=False)
    )
    b = rr * 1.02 + 5.0 * h
    if b > r_cap:
        b = min(b, r_cap)
    return ConvexDomain.sublevel(envs.q1, level, (-b, b, -b, b), validate=False)


def _compact_table(field: ScalarField, radius):
    g = field.grid
    x, y = g.points()
    act = g.active
    mask = act & (x * x + y * y <= radius * radius + 1e-12)
    if not np.any(mask):
        raise ConstructionFailureError("no nodes inside the compact comparison disk")
    shift = 1 << 20
    scale = 1 << 21
    ii = np.rint(x[mask] / g.spacing).astype(np.int64) + shift
    jj = np.rint(y[mask] / g.spacing).astype(np.int64) + shift
    keys = ii * scale + jj
    vals = field.values[mask]
    order = np.argsort(keys)
    return keys[order], vals[order]


def _window_field(field: ScalarField, radius):
    g = field.grid
    h = g.spacing
    i0 = math.ceil((-radius - g.origin[0]) / h - 1e-9)
    i1 = math.floor((radius - g.origin[0]) / h + 1e-9)
    j0 = math.ceil((-radius - g.origin[1]) / h - 1e-9)
    j1 = math.floor((radius - g.origin[1]) / h + 1e-9)
    if i0 < 0 or j0 < 0 or i1 >= g.nx or j1 >= g.ny:
        raise ConstructionFailureError("compact window exceeds the solved domain")
    vals = field.values[i0 : i1 + 1, j0 : j1 + 1].copy()
    if not np.all(np.isfinite(vals)):
        raise ConstructionFailureError("compact window touches inactive nodes")
    win = Grid2.rectangle(
        (g.origin[0] + i0 * h, g.origin[1] + j0 * h), h, vals.shape[0], vals.shape[1]
    )
    return ScalarField(win, vals)


def exhaustion_construct(
    profile: RadialProfile,
    sphere: SphereFunction,
    levels=(10.0, 20.0, 40.0),
    h=0.1,
    compact_radius=8.0,
    m_bound=None,
    newton_tol=1e-8,
    sandwich_tol=None,
    max_iter=60,
) -> ExhaustionResult:
    """Solve the Dirichlet exhaustion and check the two-sided barriers.

    Levels must be increasing.  Every level is solved on {q1 < m} with
    boundary value m, started from the lower envelope, and must stay in
    [q1, q2] up to sandwich_tol (default 1e-2 (1 + h)).  Gaps between
    consecutive solutions on the compact disk measure Cauchy decay.
    """
    levels = [float(m) for m in levels]
    if len(levels) < 2 or any(b <= a for a, b in zip(levels, levels[1:])):
        raise ValueError("levels must be at least two increasing values")
    envs = envelopes(profile, sphere, m_bound)
    tol_s = sandwich_tol if sandwich_tol is not None else 1e-2 * (1.0 + h)
    params = profile.params

    solutions, reports, tables, violations = [], [], [], []
    for m in levels:
        domain = _level_domain(envs, m, h)
        problem = DirichletProblem(
            params=params,
            domain=domain,
            boundary=BoundarySpec.const(m),
            h=h,
            tol=newton_tol,
        )
        dp = discretize(problem)
        init = envs.q1(dp.ops.pts)
        field, report = newton_solve(dp, initial=init, tol=newton_tol, max_iter=max_iter)
        cmp = comparison_check(field, envs.q1, envs.q2)
        worst = max(cmp.lower_violation, cmp.upper_violation)
        if worst > tol_s:
            raise ConstructionFailureError(
                f"level {m}: solution escapes the envelope sandwich by {worst:.3e}",
                level=m,
                margin=worst,
            )
        report.notes.append(
            f"sandwich violations: lower {cmp.lower_violation:.3e}, "
            f"upper {cmp.upper_violation:.3e}"
        )
        violations.append(worst)
        solutions.append(field)
        reports.append(report)
        tables.append(_compact_table(field, compact_radius))

    gaps, margins = [], []
    for (ka, va), (kb, vb) in zip(tables, tables[1:]):
        _, ia, ib = np.intersect1d(ka, kb, assume_unique=True, return_indices=True)
        if ia.size == 0:
            raise ConstructionFailureError("levels share no compact disk nodes")
        diff = vb[ib] - va[ia]
        gaps.append(float(np.max(np.abs(diff))))
        margins.append(float(np.min(diff)))

    final = _window_field(solutions[-1], compact_radius)
    return ExhaustionResult(
        levels=levels,
        solutions=solutions,
        reports=reports,
        cauchy_gaps=gaps,
        monotone_margins=margins,
        sandwich_violations=violations,
        final=final,
        compact_radius=float(compact_radius),
        envelopes=envs,
    )


# ---------------------------------------------------------------------------
# blow-down


@dataclass
class ConeSamples:
    directions: np.ndarray
    values: np.ndarray
    h_used: np.ndarray
    heights: np.ndarray
    quotients: np.ndarray


def _field_range(field: ScalarField):
    g = field.grid
    x, y = g.points()
    act = g.active
    ext = min(
        -float(np.min(x[act])),
        float(np.max(x[act])),
        -float(np.min(y[act])),
        float(np.max(y[act])),
    )
    return ext - 3.0 * g.spacing


def blowdown(source, heights=None, n_dirs=360, tol=1e-10) -> ConeSamples:
    """Rescaled graphs (u(h x) - u(0)) / h sampled on the unit circle.

    Convexity makes the quotients nondecreasing in h (NotConvexError
    otherwise); the cone value V(x) is extrapolated through the three
    largest heights with the model V + b (ln h)/h + c/h.
    """
    if isinstance(source, ScalarField):
        fn = source.interp
        if heights is None:
            top = _field_range(source)
            if top <= 0.5:
                raise RangeError("field support too small for a blow-down")
            heights = np.geomspace(max(0.25, top / 16.0), top, 8)
    else:
        fn = source
        if heights is None:
            heights = np.geomspace(1.0, 40.0, 8)
    heights = np.sort(np.asarray(heights, dtype=float))
    if heights.size < 3 or heights[0] <= 0:
        raise ValueError("need at least three positive heights")

    th = 2.0 * np.pi * np.arange(n_dirs) / n_dirs
    dirs = np.stack([np.cos(th), np.sin(th)], axis=-1)
    u0 = float(np.asarray(fn(np.zeros((1, 2))))[0])
    quot = np.empty((n_dirs, heights.size))
    for i, hh in enumerate(heights):
        quot[:, i] = (np.asarray(fn(hh * dirs)) - u0) / hh

    drop = np.min(quot[:, 1:] - quot[:, :-1])
    if drop < -tol * (1.0 + np.max(np.abs(quot))):
        j, i = np.unravel_index(
            np.argmin(quot[:, 1:] - quot[:, :-1]), (n_dirs, heights.size - 1)
        )
        raise NotConvexError(
            "rescaled quotients decreased between h = "
            f"{heights[i]:.4g} and {heights[i + 1]:.4g} in direction "
            f"{tuple(np.round(dirs[j], 3))} (drop {drop:.3e})"
        )

    h3 = heights[-3:]
    a = np.stack([np.ones(3), np.log(h3) / h3, 1.0 / h3], axis=-1)
    coef = np.linalg.solve(a, quot[:, -3:].T)
    return ConeSamples(dirs, coef[0], h3, heights, quot)


@dataclass
class EikonalReport:
    max_rel_error: float
    excluded_fraction: float
    ctilde: float

    @property
    def passed(self):
        return self.max_rel_error <= 0.02


def eikonal_check(cone: ConeSamples, ctilde, kink_threshold=1.0) -> EikonalReport:
    """Check |DV|^2 = g^2 + g'^2 = ctilde^2 for V = r g(phi).

    Angular derivatives use central differences; nodes where |g''|
    exceeds kink_threshold (plus two neighbors) are excluded so genuine
    cone edges do not pollute the smooth part.
    """
    g = cone.values
    k = g.size
    dphi = 2.0 * np.pi / k
    gp = (np.roll(g, -1) - np.roll(g, 1)) / (2.0 * dphi)
    gpp = (np.roll(g, -1) - 2.0 * g + np.roll(g, 1)) / dphi ** 2
    kink = np.abs(gpp) > kink_threshold
    kink = kink | np.roll(kink, 1) | np.roll(kink, -1) | np.roll(kink, 2) | np.roll(kink, -2)
    keep = ~kink
    if not np.any(keep):
        raise RangeError("kink filter excluded every direction")
    grad = np.sqrt(g[keep] ** 2 + gp[keep] ** 2)
    err = float(np.max(np.abs(grad / ctilde - 1.0)))
    return EikonalReport(err, float(np.mean(kink)), float(ctilde))


# ---------------------------------------------------------------------------
# products with a line


@dataclass
class SplitLift:
    """Affine direction times a lower dimensional translator.

    u(x) = s x_axis + lam^2 phi(x_perp / lam) with lam = sqrt(1 - s^2)
    solves the full equation with C = c_reduced / lam.
    """

    profile: RadialProfile
    slope: float
    axis: int
    params: SolitonParams

    @property
    def lam(self):
        return math.sqrt(1.0 - self.slope * self.slope)

    def __call__(self, pts):
        p = np.asarray(pts, dtype=float)
        perp = p[..., 1 - self.axis]
        return self.slope * p[..., self.axis] + self.lam ** 2 * self.profile(
            np.abs(perp) / self.lam
        )


def split_lift(profile: RadialProfile, slope, axis=1) -> SplitLift:
    if profile.params.dim != 1:
        raise ValueError("split lift needs a one dimensional profile")
    if not abs(slope) < 1.0:
        raise ValueError("affine slope must stay below 1")
    lam = math.sqrt(1.0 - slope * slope)
    # c_reduced > 1 is enforced by the profile's own parameters
    full = SolitonParams(profile.params.c / lam, 2)
    return SplitLift(profile=profile, slope=float(slope), axis=int(axis), params=full)
