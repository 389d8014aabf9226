"""Dirichlet problems for the translator equation on convex domains.

The nondivergence form a^ij u_ij = C w - 1 is discretized with central
stencils inside and Shortley-Weller cut stencils at the boundary, then
solved by a damped inexact Newton iteration.  The linearization at u is

    a^ij v_ij + (da^ij/du_k u_ij + C u_k / w) v_k = -residual(u),

assembled exactly for the discrete residual, so Newton converges
quadratically once the iterate is close and every step keeps the graph
strictly spacelike.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as _dfield
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy import ndimage

from .errors import DiscretizationError, NonConvergenceError, NotSpacelikeError
from .geometry import (
    CUT,
    EPS_SPACE,
    EXTERIOR,
    INTERIOR,
    ARM_STEPS,
    Grid2,
    OperatorSet,
    ScalarField,
    SolitonParams,
    _shift,
    build_operators,
    gradient,
)

try:
    import pyamg

    _HAVE_PYAMG = True
except Exception:  # pragma: no cover
    _HAVE_PYAMG = False

_THETA_MIN = 1e-6
_DIRECT_LIMIT = 40_000
_AMG_LIMIT = 250_000


# ---------------------------------------------------------------------------
# domains


@dataclass
class ConvexDomain:
    """Bounded convex domain: disk, convex polygon, or a convex sublevel set."""

    kind: str
    center: tuple[float, float] | None = None
    radius: float | None = None
    vertices: np.ndarray | None = None
    fn: object | None = None
    level: float | None = None
    box: tuple[float, float, float, float] | None = None

    @classmethod
    def disk(cls, center, radius):
        if radius <= 0:
            raise ValueError("disk radius must be positive")
        return cls(kind="disk", center=(float(center[0]), float(center[1])), radius=float(radius))

    @classmethod
    def polygon(cls, vertices):
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[0] < 3 or v.shape[1] != 2:
            raise ValueError("polygon needs at least 3 planar vertices")
        area2 = 0.0
        for k in range(v.shape[0]):
            a, b = v[k], v[(k + 1) % v.shape[0]]
            area2 += a[0] * b[1] - b[0] * a[1]
        if area2 < 0:
            v = v[::-1].copy()
        m = v.shape[0]
        for k in range(m):
            a, b, c = v[k], v[(k + 1) % m], v[(k + 2) % m]
            cr = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
            if cr <= 0:
                raise ValueError("polygon vertices must be in strictly convex position")
        return cls(kind="polygon", vertices=v)

    @classmethod
    def sublevel(cls, fn, level, box, validate=True, rng=None):
        dom = cls(kind="sublevel", fn=fn, level=float(level), box=tuple(float(b) for b in box))
        if validate:
            dom._spot_check_convexity(rng)
        return dom

    def _spot_check_convexity(self, rng=None, n_segments=64):
        rng = np.random.default_rng(0 if rng is None else rng)
        x0, x1, y0, y1 = self.box
        a = np.stack(
            [rng.uniform(x0, x1, n_segments), rng.uniform(y0, y1, n_segments)], axis=-1
        )
        b = np.stack(
            [rng.uniform(x0, x1, n_segments), rng.uniform(y0, y1, n_segments)], axis=-1
        )
        mid = 0.5 * (a + b)
        fa, fb, fm = self.fn(a), self.fn(b), self.fn(mid)
        slack = 1e-9 * (1.0 + np.abs(fa) + np.abs(fb))
        if np.any(fm > 0.5 * (fa + fb) + slack):
            raise ValueError("sublevel callable failed the convexity spot check")

    def inside(self, pts):
        """Strict membership test for an (..., 2) array of points."""
        p = np.asarray(pts, dtype=float)
        if self.kind == "disk":
            dx = p[..., 0] - self.center[0]
            dy = p[..., 1] - self.center[1]
            return dx * dx + dy * dy < self.radius * self.radius
        if self.kind == "polygon":
            v = self.vertices
            out = np.ones(p.shape[:-1], dtype=bool)
            m = v.shape[0]
            for k in range(m):
                a, b = v[k], v[(k + 1) % m]
                cr = (b[0] - a[0]) * (p[..., 1] - a[1]) - (b[1] - a[1]) * (
                    p[..., 0] - a[0]
                )
                out &= cr > 0.0
            return out
        return np.asarray(self.fn(p)) < self.level

    def bounds(self):
        if self.kind == "disk":
            cx, cy = self.center
            r = self.radius
            return (cx - r, cx + r, cy - r, cy + r)
        if self.kind == "polygon":
            v = self.vertices
            return (v[:, 0].min(), v[:, 0].max(), v[:, 1].min(), v[:, 1].max())
        return self.box

    def support(self, nu):
        """Support function max_{x in domain} x . nu, or None if unknown."""
        if self.kind == "disk":
            return self.center[0] * nu[0] + self.center[1] * nu[1] + self.radius
        if self.kind == "polygon":
            return float(np.max(self.vertices @ np.asarray(nu)))
        return None

    def crossing(self, p_in, step):
        """Fractions t in (0, 1] where segments p_in -> p_in + step exit.

        p_in is (m, 2) strictly inside, step a single 2-vector whose tip
        is outside (or on the boundary).
        """
        p = np.asarray(p_in, dtype=float)
        d = np.asarray(step, dtype=float)
        if self.kind == "disk":
            c = np.asarray(self.center)
            rel = p - c
            a = float(d @ d)
            b = 2.0 * (rel @ d)
            c0 = np.sum(rel * rel, axis=-1) - self.radius ** 2
            disc = np.sqrt(np.maximum(b * b - 4.0 * a * c0, 0.0))
            t = (-b + disc) / (2.0 * a)
        elif self.kind == "polygon":
            v = self.vertices
            m = v.shape[0]
            t = np.full(p.shape[0], np.inf)
            for k in range(m):
                a_, b_ = v[k], v[(k + 1) % m]
                nrm = np.array([b_[1] - a_[1], a_[0] - b_[0]])  # outward for CCW
                dn = float(nrm @ d)
                if dn <= 0.0:
                    continue
                tk = (nrm @ a_ - p @ nrm) / dn
                t = np.minimum(t, np.where(tk > 0.0, tk, np.inf))
        else:
            lo = np.zeros(p.shape[0])
            hi = np.ones(p.shape[0])
            for _ in range(48):
                mid = 0.5 * (lo + hi)
                inside_mid = self.inside(p + mid[:, None] * d)
                lo = np.where(inside_mid, mid, lo)
                hi = np.where(inside_mid, hi, mid)
            t = hi
        return np.clip(t, _THETA_MIN, 1.0)

    def descriptor(self):
        if self.kind == "disk":
            return {"kind": "disk", "center": list(self.center), "radius": self.radius}
        if self.kind == "polygon":
            return {"kind": "polygon", "vertices": self.vertices.tolist()}
        return {"kind": "sublevel", "level": self.level, "box": list(self.box)}


# ---------------------------------------------------------------------------
# boundary data


@dataclass
class BoundarySpec:
    """Dirichlet data: constant, affine, a point table, or a callable."""

    kind: str
    value: float = 0.0
    vector: tuple[float, float] = (0.0, 0.0)
    offset: float = 0.0
    points: np.ndarray | None = None
    fn: object | None = None

    @classmethod
    def const(cls, value):
        return cls(kind="const", value=float(value))

    @classmethod
    def linear(cls, vector, offset=0.0):
        v = (float(vector[0]), float(vector[1]))
        if math.hypot(*v) >= 1.0:
            raise ValueError("linear boundary data must have slope below 1")
        return cls(kind="linear", vector=v, offset=float(offset))

    @classmethod
    def table(cls, points):
        p = np.asarray(points, dtype=float)
        if p.ndim != 2 or p.shape[1] != 3:
            raise ValueError("table rows must be (x, y, value)")
        return cls(kind="table", points=p)

    @classmethod
    def from_callable(cls, fn):
        return cls(kind="callable", fn=fn)

    def __call__(self, pts):
        p = np.asarray(pts, dtype=float)
        if self.kind == "const":
            return np.full(p.shape[:-1], self.value)
        if self.kind == "linear":
            return p[..., 0] * self.vector[0] + p[..., 1] * self.vector[1] + self.offset
        if self.kind == "table":
            d2 = (
                (p[..., None, 0] - self.points[None, :, 0]) ** 2
                + (p[..., None, 1] - self.points[None, :, 1]) ** 2
            )
            return self.points[np.argmin(d2, axis=-1), 2]
        return np.asarray(self.fn(p), dtype=float)

    def descriptor(self):
        if self.kind == "const":
            return {"kind": "const", "values": self.value}
        if self.kind == "linear":
            return {"kind": "linear", "values": [*self.vector, self.offset]}
        if self.kind == "table":
            return {"kind": "table", "values": self.points.tolist()}
        return {"kind": "callable", "values": None}


@dataclass
class DirichletProblem:
    params: SolitonParams
    domain: ConvexDomain
    boundary: BoundarySpec
    h: float
    tol: float = 1e-10

    def __post_init__(self):
        if self.h <= 0:
            raise ValueError("spacing must be positive")


@dataclass
class SolveReport:
    iterations: int
    residual_history: list[float]
    spacelike_margin: float
    converged: bool
    n_active: int = 0
    notes: list[str] = _dfield(default_factory=list)


@dataclass
class DiscreteProblem:
    """Grid, operators and boundary closure for one Dirichlet problem."""

    problem: DirichletProblem
    grid: Grid2
    ops: OperatorSet
    gvec: np.ndarray
    n_interior: int
    g_lipschitz: float
    notes: list[str]

    @property
    def n_active(self):
        return self.ops.n_active

    def field(self, u):
        return ScalarField(self.grid, self.ops.scatter(self.grid, u))

    def sample(self, fn):
        return np.asarray(fn(self.ops.pts), dtype=float)

    def default_initial(self):
        """Boundary-consistent starting graph.

        First choice is the discrete harmonic extension of g (a single
        linear solve with the Laplacian part of the operators): it meets
        the boundary data exactly and is as flat as the data allows.  If
        its discrete gradient leaves the lightcone the cone envelope
        u0 = max_k (g_k - s |x - b_k|) with s >= max(ctilde, Lip g) is
        used instead.  Either way the result must be strictly spacelike;
        pass an explicit initial guess if both fail.
        """
        lap = (self.ops.d2x + self.ops.d2y).tocsr()
        rhs = -(self.ops.b2x + self.ops.b2y) @ self.gvec
        cap = 0.98 * (1.0 - EPS_SPACE) ** 2
        try:
            u = _linear_solve(lap, rhs, 1e-10, [])
            if _gradient_sq_max(self, u) < cap:
                return u
        except Exception:
            pass
        u = self.cone_envelope()
        if _gradient_sq_max(self, u) >= cap:
            raise NotSpacelikeError(
                "no spacelike default initial guess; supply one explicitly"
            )
        return u

    def cone_envelope(self):
        """Lower envelope max_k ( g(b_k) - s |x - b_k| ) over all
        boundary arms, with s >= max(ctilde, Lip g) but below 1."""
        ct = self.problem.params.ctilde
        lip = self.g_lipschitz
        s = ct if lip <= ct else min(lip * 1.001 + 1e-9, 0.5 * (1.0 + lip))
        b, g = self.ops.bpts, self.gvec
        pts = self.ops.pts
        out = np.full(pts.shape[0], -np.inf)
        for k in range(0, pts.shape[0], 4096):
            blk = pts[k : k + 4096]
            best = np.full(blk.shape[0], -np.inf)
            for m in range(0, b.shape[0], 2048):
                d = np.hypot(
                    blk[:, None, 0] - b[None, m : m + 2048, 0],
                    blk[:, None, 1] - b[None, m : m + 2048, 1],
                )
                cand = np.max(g[None, m : m + 2048] - s * d, axis=1)
                best = np.maximum(best, cand)
            out[k : k + 4096] = best
        return out


def discretize(problem: DirichletProblem, snap_boundary=False) -> DiscreteProblem:
    """Classify nodes, compute cut fractions, sample boundary data.

    The grid origin is snapped to integer multiples of h so that separate
    discretizations at the same spacing share lattice points.

    snap_boundary forces every cut fraction to 1, moving the boundary
    onto the first exterior lattice ring (an O(h) domain perturbation).
    Explicit time stepping needs this: the stable step at a cut node
    scales like (theta h)^2, so genuine cuts would stall the flow.
    """
    h = problem.h
    x0, x1, y0, y1 = problem.domain.bounds()
    i_lo, i_hi = math.floor(x0 / h) - 2, math.ceil(x1 / h) + 2
    j_lo, j_hi = math.floor(y0 / h) - 2, math.ceil(y1 / h) + 2
    nx, ny = i_hi - i_lo + 1, j_hi - j_lo + 1
    origin = (i_lo * h, j_lo * h)

    xs = origin[0] + h * np.arange(nx)
    ys = origin[1] + h * np.arange(ny)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts_all = np.stack([X, Y], axis=-1)
    active = problem.domain.inside(pts_all)
    if not np.any(active):
        raise DiscretizationError("domain contains no grid nodes at this spacing")

    structure = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])
    _, ncomp = ndimage.label(active, structure=structure)
    if ncomp != 1:
        raise DiscretizationError(
            f"domain interior is disconnected at spacing h = {h} ({ncomp} components)"
        )

    full = (
        _shift(active, 1, 0, fill=False)
        & _shift(active, -1, 0, fill=False)
        & _shift(active, 0, 1, fill=False)
        & _shift(active, 0, -1, fill=False)
    )
    if int((active & full).sum()) < 100:
        raise DiscretizationError(
            "domain needs at least a 10x10 block of interior nodes; reduce h"
        )

    theta = np.ones((nx, ny, 4))
    barm = np.zeros((nx, ny, 4), dtype=bool)
    for a, (di, dj) in enumerate(ARM_STEPS):
        nb_active = _shift(active, di, dj, fill=False)
        cut = active & ~nb_active
        if not np.any(cut):
            continue
        ii, jj = np.nonzero(cut)
        if not snap_boundary:
            p_in = np.stack([X[ii, jj], Y[ii, jj]], axis=-1)
            step = np.array([di * h, dj * h])
            theta[ii, jj, a] = problem.domain.crossing(p_in, step)
        barm[ii, jj, a] = True

    cls = np.full((nx, ny), EXTERIOR, dtype=np.int8)
    has_cut = np.any(barm & (theta < 1.0 - 1e-12), axis=-1)
    cls[active & ~has_cut] = INTERIOR
    cls[active & has_cut] = CUT

    grid = Grid2(origin, h, nx, ny, cls, theta, barm)
    grid.validate()
    ops = build_operators(grid)
    gvec = np.asarray(problem.boundary(ops.bpts), dtype=float)
    g_lip = _boundary_lipschitz(ops.bpts, gvec, h)

    notes = []
    if problem.domain.kind == "polygon":
        notes.append(
            "polygon boundary is only piecewise smooth; interior estimates "
            "near corners are not covered by the C^{2,alpha} theory"
        )
    return DiscreteProblem(
        problem, grid, ops, gvec, int((active & full).sum()), g_lip, notes
    )


def _boundary_lipschitz(bpts, gvec, h, limit=1.0 - 1e-10, sample=2000):
    """Sampled Lipschitz ratio of the boundary data; must stay below 1
    for the graph to admit a spacelike filling."""
    if bpts.shape[0] < 2:
        return 0.0
    rng = np.random.default_rng(12345)
    m = bpts.shape[0]
    k = min(sample, m)
    sel = rng.choice(m, size=k, replace=False)
    p = bpts[sel]
    g = gvec[sel]
    dx = np.hypot(p[:, None, 0] - p[None, :, 0], p[:, None, 1] - p[None, :, 1])
    dg = np.abs(g[:, None] - g[None, :])
    ok = dx >= 0.25 * h
    if not np.any(ok):
        return 0.0
    worst = float(np.max(dg[ok] / dx[ok]))
    if worst >= limit:
        raise ValueError(
            f"boundary data is not spacelike: sampled Lipschitz ratio {worst:.6g} >= 1"
        )
    return worst


# ---------------------------------------------------------------------------
# residual, Jacobian, Newton


def _gradient_sq_max(dp: DiscreteProblem, u, gvec=None):
    g = dp.gvec if gvec is None else gvec
    p1, p2 = dp.ops.gradient_values(u, g)
    return float(np.max(p1 * p1 + p2 * p2))


def residual_vector(dp: DiscreteProblem, u, gvec=None):
    """Discrete residual and the pointwise pieces used by the Jacobian.

    gvec overrides the stored boundary data (the flow translates it)."""
    c = dp.problem.params.c
    g = dp.gvec if gvec is None else gvec
    p1, p2 = dp.ops.gradient_values(u, g)
    u11, u22, u12 = dp.ops.second_values(u, g)
    w2 = 1.0 - p1 * p1 - p2 * p2
    if np.min(w2) <= EPS_SPACE:
        worst = int(np.argmin(w2))
        raise NotSpacelikeError(
            f"iterate not strictly spacelike at x = {tuple(dp.ops.pts[worst])}",
            where=tuple(dp.ops.pts[worst]),
            grad_norm=float(math.sqrt(1.0 - min(np.min(w2), 1.0))),
        )
    w = np.sqrt(w2)
    a11 = 1.0 + p1 * p1 / w2
    a22 = 1.0 + p2 * p2 / w2
    a12 = p1 * p2 / w2
    res = a11 * u11 + 2.0 * a12 * u12 + a22 * u22 - (c * w - 1.0)
    parts = {
        "p1": p1,
        "p2": p2,
        "w": w,
        "w2": w2,
        "a11": a11,
        "a22": a22,
        "a12": a12,
        "u11": u11,
        "u22": u22,
        "u12": u12,
    }
    return res, parts


def jacobian_matrix(dp: DiscreteProblem, parts) -> sp.csr_matrix:
    """Exact Jacobian of the discrete residual at the current iterate."""
    c = dp.problem.params.c
    p1, p2, w, w2 = parts["p1"], parts["p2"], parts["w"], parts["w2"]
    u11, u22, u12 = parts["u11"], parts["u22"], parts["u12"]
    w4 = w2 * w2
    da11_p1 = 2.0 * p1 / w2 + 2.0 * p1 ** 3 / w4
    da11_p2 = 2.0 * p1 * p1 * p2 / w4
    da22_p2 = 2.0 * p2 / w2 + 2.0 * p2 ** 3 / w4
    da22_p1 = 2.0 * p2 * p2 * p1 / w4
    da12_p1 = p2 / w2 + 2.0 * p1 * p1 * p2 / w4
    da12_p2 = p1 / w2 + 2.0 * p1 * p2 * p2 / w4
    g1 = u11 * da11_p1 + u22 * da22_p1 + 2.0 * u12 * da12_p1 + c * p1 / w
    g2 = u11 * da11_p2 + u22 * da22_p2 + 2.0 * u12 * da12_p2 + c * p2 / w

    ops = dp.ops
    col = lambda v: v[:, None]
    jac = (
        ops.d2x.multiply(col(parts["a11"]))
        + ops.d2y.multiply(col(parts["a22"]))
        + ops.dxy.multiply(col(2.0 * parts["a12"]))
        + ops.d1x.multiply(col(g1))
        + ops.d1y.multiply(col(g2))
    )
    return jac.tocsr()


def _linear_solve(jac, rhs, rtol, notes):
    n = jac.shape[0]
    rtol = max(rtol, 1e-13)
    if n <= _DIRECT_LIMIT:
        return spla.splu(jac.tocsc()).solve(rhs)
    if n > _AMG_LIMIT and _HAVE_PYAMG:
        try:
            ml = pyamg.smoothed_aggregation_solver(
                jac.tocsr(), symmetry="nonsymmetric", max_coarse=1000
            )
            prec = ml.aspreconditioner(cycle="V")
            x, info = spla.bicgstab(jac, rhs, rtol=rtol, atol=0.0, maxiter=400, M=prec)
            if info == 0:
                return x
            notes.append(f"amg bicgstab stalled (info={info}); trying ilu")
        except Exception as exc:  # pragma: no cover
            notes.append(f"amg setup failed ({exc}); trying ilu")
    try:
        ilu = spla.spilu(jac.tocsc(), drop_tol=1e-5, fill_factor=12)
        prec = spla.LinearOperator(jac.shape, matvec=ilu.solve)
        x, info = spla.bicgstab(jac, rhs, rtol=rtol, atol=0.0, maxiter=800, M=prec)
        if info == 0:
            return x
        notes.append(f"ilu bicgstab stalled (info={info}); falling back to direct")
    except Exception as exc:
        notes.append(f"ilu failed ({exc}); falling back to direct")
    return spla.splu(jac.tocsc()).solve(rhs)


def newton_solve(
    problem,
    initial=None,
    tol: float | None = None,
    max_iter: int = 60,
    forcing: float = 1e-2,
):
    """Damped inexact Newton for the Dirichlet problem.

    initial may be None (lower barrier envelope), a callable on points, a
    ScalarField, or a vector on active nodes.  Steps are accepted only if
    the squared residual merit decreases, the max norm residual strictly
    decreases, and the iterate stays strictly spacelike; the step is
    halved otherwise and NonConvergenceError is raised below 1e-12.
    """
    dp = problem if isinstance(problem, DiscreteProblem) else discretize(problem)
    if tol is None:
        tol = dp.problem.tol

    if initial is None:
        u = dp.default_initial()
    elif isinstance(initial, ScalarField):
        u = initial.values[dp.grid.active]
    elif callable(initial):
        u = dp.sample(initial)
    else:
        u = np.asarray(initial, dtype=float).copy()
    if u.shape != (dp.n_active,):
        raise ValueError("initial guess does not match the active node count")

    notes = list(dp.notes)
    res, parts = residual_vector(dp, u)
    rinf = float(np.max(np.abs(res)))
    history = [rinf]
    converged = rinf <= tol
    iters = 0

    while not converged and iters < max_iter:
        jac = jacobian_matrix(dp, parts)
        eta = min(forcing, 0.5 * rinf)
        step = _linear_solve(jac, -res, eta, notes)
        merit0 = float(res @ res)
        t = 1.0
        accepted = False
        while t >= 1e-12:
            cand = u + t * step
            if _gradient_sq_max(dp, cand) >= (1.0 - EPS_SPACE) ** 2:
                t *= 0.5
                continue
            res_c, parts_c = residual_vector(dp, cand)
            rinf_c = float(np.max(np.abs(res_c)))
            merit_c = float(res_c @ res_c)
            if merit_c <= merit0 * (1.0 - 1e-4 * t) and rinf_c < rinf:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            report = SolveReport(iters, history, _margin(dp, parts), False, dp.n_active, notes)
            raise NonConvergenceError(
                f"line search failed at iteration {iters} (residual {rinf:.3e})",
                report=report,
            )
        u, res, parts, rinf = cand, res_c, parts_c, rinf_c
        history.append(rinf)
        iters += 1
        converged = rinf <= tol

    report = SolveReport(iters, history, _margin(dp, parts), converged, dp.n_active, notes)
    if not converged:
        raise NonConvergenceError(
            f"not converged after {max_iter} iterations (residual {rinf:.3e})",
            report=report,
        )
    return dp.field(u), report


def _margin(dp, parts):
    gn = np.hypot(parts["p1"], parts["p2"])
    return float(dp.problem.params.ctilde - np.max(gn))


# ---------------------------------------------------------------------------
# a posteriori checks


@dataclass
class ComparisonReport:
    lower_violation: float
    upper_violation: float

    @property
    def passed(self):
        return self.lower_violation <= 0.0 and self.upper_violation <= 0.0


def comparison_check(field: ScalarField, lower, upper) -> ComparisonReport:
    """Max violations of lower <= u <= upper over active nodes.

    lower and upper are callables on (N, 2) point arrays; violations are
    positive numbers when the bound fails.
    """
    g = field.grid
    act = g.active
    x, y = g.points()
    pts = np.stack([x[act], y[act]], axis=-1)
    u = field.values[act]
    lo = np.asarray(lower(pts), dtype=float)
    up = np.asarray(upper(pts), dtype=float)
    return ComparisonReport(
        lower_violation=float(np.max(lo - u)),
        upper_violation=float(np.max(u - up)),
    )


@dataclass
class GradientBoundReport:
    max_gradient: float
    bound: float
    kappa: float

    @property
    def passed(self):
        return self.max_gradient <= self.bound


def gradient_bound_check(field: ScalarField, params: SolitonParams, kappa: float = 5.0):
    """Interior gradient bound max |Du| <= ctilde + kappa h."""
    du = gradient(field)
    gn = np.hypot(du[:, :, 0], du[:, :, 1])
    gn = np.where(field.grid.active, gn, np.nan)
    bound = params.ctilde + kappa * field.grid.spacing
    return GradientBoundReport(float(np.nanmax(gn)), float(bound), float(kappa))


def jacobian_consistency(dp: DiscreteProblem, u, n_dirs=10, eps=(1e-4, 1e-5), seed=42):
    """Compare J v with central differences of the residual.

    Returns one dict per random direction with the errors at both steps
    and the Richardson order log(err_hi / err_lo) / log(eps_hi / eps_lo);
    the assembled Jacobian is exact for the discrete residual, so the
    order should be 2.
    """
    rng = np.random.default_rng(seed)
    res0, parts = residual_vector(dp, u)
    jac = jacobian_matrix(dp, parts)
    out = []
    for _ in range(n_dirs):
        v = rng.uniform(-1.0, 1.0, dp.n_active)
        v /= np.max(np.abs(v))
        jv = jac @ v
        errs = []
        for e in eps:
            rp, _ = residual_vector(dp, u + e * v)
            rm, _ = residual_vector(dp, u - e * v)
            fd = (rp - rm) / (2.0 * e)
            errs.append(float(np.max(np.abs(fd - jv))))
        order = math.log(errs[0] / errs[1]) / math.log(eps[0] / eps[1])
        out.append({"err_hi": errs[0], "err_lo": errs[1], "order": order})
    return out


# ---------------------------------------------------------------------------
# JSON problem descriptions


def problem_to_json(problem: DirichletProblem, path=None):
    doc = {
        "C": problem.params.c,
        "n": problem.params.dim,
        "domain": problem.domain.descriptor(),
        "boundary": problem.boundary.descriptor(),
        "h": problem.h,
        "tol": problem.tol,
    }
    if path is not None:
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=1)
    return doc


def problem_from_json(source) -> DirichletProblem:
    if isinstance(source, (str, Path)):
        with open(source) as fh:
            doc = json.load(fh)
    else:
        doc = dict(source)
    params = SolitonParams(float(doc["C"]), int(doc.get("n", 2)))
    d = doc["domain"]
    if d["kind"] == "disk":
        domain = ConvexDomain.disk(d["center"], d["radius"])
    elif d["kind"] == "polygon":
        domain = ConvexDomain.polygon(d["vertices"])
    else:
        raise ValueError("only disk and polygon domains load from JSON")
    b = doc["boundary"]
    if b["kind"] == "const":
        boundary = BoundarySpec.const(b["values"])
    elif b["kind"] == "linear":
        vec = b["values"]
        boundary = BoundarySpec.linear((vec[0], vec[1]), vec[2] if len(vec) > 2 else 0.0)
    elif b["kind"] == "table":
        boundary = BoundarySpec.table(b["values"])
    else:
        raise ValueError(f"unknown boundary kind {b['kind']!r}")
    return DirichletProblem(
        params=params,
        domain=domain,
        boundary=boundary,
        h=float(doc["h"]),
        tol=float(doc.get("tol", 1e-10)),
    )
