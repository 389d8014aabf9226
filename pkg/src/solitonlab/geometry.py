"""Grids, fields, and discrete operators for strictly spacelike graphs.

A height function u on a uniform 2d grid describes a spacelike graph when
|Du| < 1.  Everything downstream is built from the quantities

    w    = sqrt(1 - |Du|^2)          (Lorentz factor)
    a^ij = delta_ij + u_i u_j / w^2  (inverse induced metric, scaled)

and the downward translator equation in nondivergence form

    a^ij u_ij - (C w - 1) = 0,   C > 1.

Stencils are second order central at interior nodes.  Next to a curved
domain boundary the grid stores per arm cut fractions theta in (0, 1] and
the operators switch to Shortley-Weller style unequal arm stencils, with
one-sided fallbacks when no boundary data is attached.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as _dfield
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import DiscretizationError, NotSpacelikeError, RangeError

EPS_SPACE = 1e-8

EXTERIOR, INTERIOR, CUT = 0, 1, 2

# arm order: -x, +x, -y, +y
ARM_STEPS = ((-1, 0), (1, 0), (0, -1), (0, 1))


@dataclass(frozen=True)
class SolitonParams:
    """Forcing constant c > 1 and ambient graph dimension."""

    c: float
    dim: int

    def __post_init__(self):
        if not self.c > 1.0:
            raise ValueError(f"forcing constant must exceed 1, got {self.c}")
        if self.dim < 1:
            raise ValueError(f"dimension must be at least 1, got {self.dim}")

    @property
    def ctilde(self) -> float:
        """Slope of the asymptotic light-cone-like planes, sqrt(1 - 1/c^2)."""
        return math.sqrt(1.0 - 1.0 / (self.c * self.c))


@dataclass
class Grid2:
    """Uniform grid with node classification and boundary cut fractions.

    Node (i, j) sits at origin + (i, j) * spacing.  cls marks nodes as
    exterior (no value), interior (full central stencils), or cut (at
    least one arm shortened by the domain boundary or missing).  theta
    holds the per arm fraction of a full spacing, barm marks arms that
    terminate on the domain boundary and carry Dirichlet data.
    """

    origin: tuple[float, float]
    spacing: float
    nx: int
    ny: int
    cls: np.ndarray
    theta: np.ndarray
    barm: np.ndarray

    @classmethod
    def rectangle(cls, origin, spacing, nx, ny):
        """All-active rectangle; edge nodes are cut (one-sided stencils)."""
        if nx < 2 or ny < 2:
            raise ValueError("rectangle grid needs nx, ny >= 2")
        c = np.full((nx, ny), CUT, dtype=np.int8)
        c[1:-1, 1:-1] = INTERIOR
        theta = np.ones((nx, ny, 4))
        barm = np.zeros((nx, ny, 4), dtype=bool)
        return cls(tuple(origin), float(spacing), nx, ny, c, theta, barm)

    @property
    def active(self) -> np.ndarray:
        return self.cls != EXTERIOR

    @property
    def interior(self) -> np.ndarray:
        return self.cls == INTERIOR

    def xs(self) -> np.ndarray:
        return self.origin[0] + self.spacing * np.arange(self.nx)

    def ys(self) -> np.ndarray:
        return self.origin[1] + self.spacing * np.arange(self.ny)

    def points(self):
        """Meshgrid coordinate arrays, shape (nx, ny) each."""
        return np.meshgrid(self.xs(), self.ys(), indexing="ij")

    def node_xy(self, i, j):
        return (self.origin[0] + i * self.spacing, self.origin[1] + j * self.spacing)

    def validate(self):
        """Invariants: interior arms close (active neighbor or a full
        length boundary arm), cut fractions lie in (0, 1].  A boundary
        arm with theta = 1 (boundary passing exactly through the
        neighbor lattice point) still gives a centered stencil, so
        aligned rectangles produce no cut nodes.  Cut nodes may carry
        open arms; operator assembly rejects them if it needs one."""
        act = self.active
        for a, (di, dj) in enumerate(ARM_STEPS):
            nb = _shift(act, di, dj, fill=False)
            open_arm = self.interior & ~nb & ~self.barm[:, :, a]
            if np.any(open_arm):
                i, j = np.argwhere(open_arm)[0]
                raise DiscretizationError(
                    f"interior node ({i}, {j}) has an arm with neither an "
                    "active neighbor nor boundary data"
                )
            short = self.interior & self.barm[:, :, a] & (
                self.theta[:, :, a] < 1.0 - 1e-12
            )
            if np.any(short):
                i, j = np.argwhere(short)[0]
                raise DiscretizationError(
                    f"interior node ({i}, {j}) has a shortened boundary arm"
                )
        th = self.theta[self.barm]
        if th.size and (np.any(th <= 0.0) or np.any(th > 1.0)):
            raise DiscretizationError("cut fractions must lie in (0, 1]")


def _shift(a, di, dj, fill=np.nan):
    """Array with out[i, j] = a[i + di, j + dj], padded with fill."""
    out = np.full(a.shape, fill, dtype=a.dtype if a.dtype != bool else bool)
    nx, ny = a.shape[0], a.shape[1]
    i0, i1 = max(0, -di), min(nx, nx - di)
    j0, j1 = max(0, -dj), min(ny, ny - dj)
    if i0 < i1 and j0 < j1:
        out[i0:i1, j0:j1] = a[i0 + di : i1 + di, j0 + dj : j1 + dj]
    return out


@dataclass
class ScalarField:
    """Nodal values on a Grid2, NaN at exterior nodes."""

    grid: Grid2
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (self.grid.nx, self.grid.ny):
            raise ValueError("values shape does not match grid")

    @classmethod
    def from_function(cls, grid, fn):
        """Sample fn(points) on active nodes; fn takes an (..., 2) array."""
        x, y = grid.points()
        pts = np.stack([x, y], axis=-1)
        vals = np.asarray(fn(pts), dtype=float)
        vals = np.where(grid.active, vals, np.nan)
        return cls(grid, vals)

    def copy_with(self, values):
        return ScalarField(self.grid, values)

    def active_values(self):
        return self.values[self.grid.active]

    def interp(self, pts):
        """Local bicubic (4x4 Lagrange) interpolation at pts, shape (..., 2).

        Exact on cubics, O(h^4) for smooth data.  Raises RangeError when a
        requested point lacks a fully active 4x4 stencil.
        """
        g = self.grid
        p = np.asarray(pts, dtype=float)
        shape = p.shape[:-1]
        p = p.reshape(-1, 2)
        tx = (p[:, 0] - g.origin[0]) / g.spacing
        ty = (p[:, 1] - g.origin[1]) / g.spacing
        ix = np.floor(tx).astype(np.int64)
        iy = np.floor(ty).astype(np.int64)
        if np.any((ix < 1) | (ix > g.nx - 3) | (iy < 1) | (iy > g.ny - 3)):
            raise RangeError("interpolation point outside bicubic support")
        xi = tx - ix
        eta = ty - iy
        wx = _lagrange_weights(xi)
        wy = _lagrange_weights(eta)
        out = np.zeros(p.shape[0])
        for a in range(4):
            row = np.zeros(p.shape[0])
            for b in range(4):
                row += wy[b] * self.values[ix + a - 1, iy + b - 1]
            out += wx[a] * row
        if np.any(~np.isfinite(out)):
            raise RangeError("interpolation stencil touches exterior nodes")
        return out.reshape(shape)


def _lagrange_weights(t):
    """Cubic Lagrange weights on nodes {-1, 0, 1, 2} at parameter t."""
    return (
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t * t - 1.0) * (t - 2.0) / 2.0,
        -t * (t + 1.0) * (t - 2.0) / 2.0,
        t * (t * t - 1.0) / 6.0,
    )


# ---------------------------------------------------------------------------
# nodal finite differences on plain fields


def gradient(field: ScalarField) -> np.ndarray:
    """Discrete Du, shape (nx, ny, 2), NaN at exterior nodes.

    Central second order where both axis neighbors are active, one-sided
    second order (three point) at cut nodes, first order two point as a
    last resort.
    """
    g = field.grid
    if g.nx < 3 or g.ny < 3:
        raise ValueError("gradient needs a grid of at least 3x3 nodes")
    out = np.empty((g.nx, g.ny, 2))
    out[:, :, 0] = _axis_derivative(field, 0)
    out[:, :, 1] = _axis_derivative(field, 1)
    return out


def _axis_derivative(field, axis):
    g = field.grid
    v = field.values
    act = g.active
    h = g.spacing
    st = (1, 0) if axis == 0 else (0, 1)
    vp1, ap1 = _shift(v, *st), _shift(act, *st, fill=False)
    vm1, am1 = _shift(v, -st[0], -st[1]), _shift(act, -st[0], -st[1], fill=False)
    vp2, ap2 = _shift(v, 2 * st[0], 2 * st[1]), _shift(act, 2 * st[0], 2 * st[1], fill=False)
    vm2, am2 = _shift(v, -2 * st[0], -2 * st[1]), _shift(act, -2 * st[0], -2 * st[1], fill=False)

    with np.errstate(invalid="ignore"):
        central = (vp1 - vm1) / (2.0 * h)
        fwd3 = (-3.0 * v + 4.0 * vp1 - vp2) / (2.0 * h)
        bwd3 = (3.0 * v - 4.0 * vm1 + vm2) / (2.0 * h)
        fwd2 = (vp1 - v) / h
        bwd2 = (vm1 - v) / h

    out = np.full(v.shape, np.nan)
    order = [
        (am1 & ap1, central),
        (ap1 & ap2, fwd3),
        (am1 & am2, bwd3),
        (ap1, fwd2),
        (am1, bwd2),
    ]
    todo = act.copy()
    for mask, val in order:
        pick = todo & mask
        out[pick] = val[pick]
        todo &= ~pick
    return out


def _second_derivatives(field):
    """(uxx, uyy, uxy) central at interior nodes, NaN elsewhere.

    The mixed derivative falls back to averaged or one-sided corner
    stencils when diagonal neighbors are exterior.
    """
    g = field.grid
    v = field.values
    act = g.active
    h2 = g.spacing ** 2

    def sh(di, dj):
        return _shift(v, di, dj)

    def sa(di, dj):
        return _shift(act, di, dj, fill=False)

    with np.errstate(invalid="ignore"):
        uxx = (sh(1, 0) - 2.0 * v + sh(-1, 0)) / h2
        uyy = (sh(0, 1) - 2.0 * v + sh(0, -1)) / h2
    uxx = np.where(sa(1, 0) & sa(-1, 0) & act, uxx, np.nan)
    uyy = np.where(sa(0, 1) & sa(0, -1) & act, uyy, np.nan)

    app, apm, amp, amm = sa(1, 1), sa(1, -1), sa(-1, 1), sa(-1, -1)
    ap0, am0, a0p, a0m = sa(1, 0), sa(-1, 0), sa(0, 1), sa(0, -1)
    vpp, vpm, vmp, vmm = sh(1, 1), sh(1, -1), sh(-1, 1), sh(-1, -1)
    vp0, vm0, v0p, v0m = sh(1, 0), sh(-1, 0), sh(0, 1), sh(0, -1)

    with np.errstate(invalid="ignore"):
        cross = (vpp - vpm - vmp + vmm) / (4.0 * h2)
        pair_a = (vpp + vmm - vp0 - vm0 - v0p - v0m + 2.0 * v) / (2.0 * h2)
        pair_b = (vp0 + vm0 + v0p + v0m - vpm - vmp - 2.0 * v) / (2.0 * h2)
        singles = [
            (app & ap0 & a0p, (vpp - vp0 - v0p + v) / h2),
            (amm & am0 & a0m, (vmm - vm0 - v0m + v) / h2),
            (apm & ap0 & a0m, -(vpm - vp0 - v0m + v) / h2),
            (amp & am0 & a0p, -(vmp - vm0 - v0p + v) / h2),
        ]
    uxy = np.full(v.shape, np.nan)
    order = [
        (app & apm & amp & amm, cross),
        (app & amm & ap0 & am0 & a0p & a0m, pair_a),
        (apm & amp & ap0 & am0 & a0p & a0m, pair_b),
    ] + singles
    todo = act.copy()
    for mask, val in order:
        pick = todo & mask
        uxy[pick] = val[pick]
        todo &= ~pick
    return uxx, uyy, uxy


@dataclass
class GeometryBundle:
    """Pointwise geometric data of a spacelike graph.

    du, w, aij live on all active nodes; hess, mean_h, norm_a_sq and
    lam_min need full second derivative stencils and are NaN outside the
    interior.  mean_h is the mean curvature a^ij u_ij / w, norm_a_sq the
    squared norm of the second fundamental form, lam_min the smaller
    eigenvalue of the Euclidean Hessian (convexity monitor).
    """

    du: np.ndarray
    w: np.ndarray
    aij: np.ndarray
    hess: np.ndarray
    mean_h: np.ndarray
    norm_a_sq: np.ndarray
    lam_min: np.ndarray


def check_spacelike(grid, du, eps=EPS_SPACE):
    """Raise NotSpacelikeError if max |Du| over active nodes >= 1 - eps."""
    gn = np.hypot(du[:, :, 0], du[:, :, 1])
    gn = np.where(grid.active, gn, np.nan)
    worst = np.nanmax(gn)
    if worst >= 1.0 - eps:
        i, j = np.unravel_index(np.nanargmax(gn), gn.shape)
        raise NotSpacelikeError(
            f"graph not strictly spacelike: |Du| = {worst:.12g} at node "
            f"({i}, {j}), x = {grid.node_xy(i, j)}",
            node=(int(i), int(j)),
            where=grid.node_xy(i, j),
            grad_norm=float(worst),
        )
    return gn


def bundle(field: ScalarField, params: SolitonParams) -> GeometryBundle:
    """Assemble Du, w, a^ij, Hessian, H, |A|^2 and the convexity monitor."""
    g = field.grid
    du = gradient(field)
    check_spacelike(g, du)
    p1, p2 = du[:, :, 0], du[:, :, 1]
    with np.errstate(invalid="ignore"):
        w2 = 1.0 - p1 * p1 - p2 * p2
        w = np.sqrt(w2)
        a11 = 1.0 + p1 * p1 / w2
        a22 = 1.0 + p2 * p2 / w2
        a12 = p1 * p2 / w2

    uxx, uyy, uxy = _second_derivatives(field)
    with np.errstate(invalid="ignore"):
        trace = a11 * uxx + 2.0 * a12 * uxy + a22 * uyy
        mean_h = trace / w
        b11 = a11 * uxx + a12 * uxy
        b12 = a11 * uxy + a12 * uyy
        b21 = a12 * uxx + a22 * uxy
        b22 = a12 * uxy + a22 * uyy
        norm_a_sq = (b11 * b11 + b22 * b22 + 2.0 * b12 * b21) / w2
        lam_min = 0.5 * (uxx + uyy) - np.sqrt(0.25 * (uxx - uyy) ** 2 + uxy * uxy)

    aij = np.empty((g.nx, g.ny, 2, 2))
    aij[:, :, 0, 0] = a11
    aij[:, :, 0, 1] = a12
    aij[:, :, 1, 0] = a12
    aij[:, :, 1, 1] = a22
    hess = np.empty((g.nx, g.ny, 2, 2))
    hess[:, :, 0, 0] = uxx
    hess[:, :, 0, 1] = uxy
    hess[:, :, 1, 0] = uxy
    hess[:, :, 1, 1] = uyy
    return GeometryBundle(du, w, aij, hess, mean_h, norm_a_sq, lam_min)


def residual_from_parts(du, hess, params):
    """a^ij u_ij - (C w - 1) from gradient and Hessian arrays.

    Linear in the Hessian for frozen du, which is what the Newton
    linearization and its tests rely on.
    """
    p1 = du[..., 0]
    p2 = du[..., 1]
    with np.errstate(invalid="ignore"):
        w2 = 1.0 - p1 * p1 - p2 * p2
        w = np.sqrt(w2)
        a11 = 1.0 + p1 * p1 / w2
        a22 = 1.0 + p2 * p2 / w2
        a12 = p1 * p2 / w2
        trace = (
            a11 * hess[..., 0, 0]
            + 2.0 * a12 * hess[..., 0, 1]
            + a22 * hess[..., 1, 1]
        )
    return trace - (params.c * w - 1.0)


def residual(field: ScalarField, params: SolitonParams) -> ScalarField:
    """Equation residual per interior node (NaN elsewhere)."""
    g = field.grid
    du = gradient(field)
    check_spacelike(g, du)
    uxx, uyy, uxy = _second_derivatives(field)
    hess = np.empty((g.nx, g.ny, 2, 2))
    hess[:, :, 0, 0] = uxx
    hess[:, :, 0, 1] = uxy
    hess[:, :, 1, 0] = uxy
    hess[:, :, 1, 1] = uyy
    vals = residual_from_parts(du, hess, params)
    vals = np.where(g.interior, vals, np.nan)
    return ScalarField(g, vals)


# ---------------------------------------------------------------------------
# smoothed minimum


def smooth_min(values, delta):
    """Smoothed minimum mu_n with smoothing scale delta >= 0.

    mu_2(a, b) = (a + b)/2 - sqrt(((a - b)/2)^2 + delta^2), and for n > 2
    mu_n averages mu_2(x_i, mu_{n-1} of the rest) over i.  Symmetric,
    nondecreasing and concave in the arguments, with
    min - n delta <= mu_n <= min, and exactly min at delta = 0.
    """
    xs = np.asarray(values, dtype=float).ravel()
    n = xs.size
    if n < 2:
        raise ValueError("smooth_min needs at least two values")
    if not np.all(np.isfinite(xs)):
        raise ValueError("smooth_min arguments must be finite")
    if delta < 0.0:
        raise ValueError("delta must be nonnegative")
    d2 = float(delta) * float(delta)

    def mu2(a, b):
        d = 0.5 * (a - b)
        return 0.5 * (a + b) - math.sqrt(d * d + d2)

    memo = {}

    def mu(idx):
        if len(idx) == 1:
            return xs[idx[0]]
        if len(idx) == 2:
            return mu2(xs[idx[0]], xs[idx[1]])
        got = memo.get(idx)
        if got is not None:
            return got
        acc = 0.0
        for k in range(len(idx)):
            rest = idx[:k] + idx[k + 1 :]
            acc += mu2(xs[idx[k]], mu(rest))
        out = acc / len(idx)
        memo[idx] = out
        return out

    return mu(tuple(range(n)))


def smooth_min_gradient(values, delta):
    """Central difference gradient of smooth_min, step 1e-6 (1 + |x_i|)."""
    xs = np.asarray(values, dtype=float).ravel()
    out = np.empty_like(xs)
    for i in range(xs.size):
        step = 1e-6 * (1.0 + abs(xs[i]))
        hi = xs.copy()
        lo = xs.copy()
        hi[i] += step
        lo[i] -= step
        out[i] = (smooth_min(hi, delta) - smooth_min(lo, delta)) / (2.0 * step)
    return out


# ---------------------------------------------------------------------------
# calculus identity for the Lorentz factor


class _SymDict(dict):
    """Symmetric index lookup: d["21"] falls back to d["12"]."""

    def __missing__(self, key):
        return self[key[::-1]]


def hessian_identity_check(field: ScalarField) -> float:
    """Max relative discrepancy of the identity

        w_ij = -u_k u_kij / w - (1/w) a^kl u_ki u_lj

    with every derivative taken by central differences.  Both sides are
    second order consistent, so the discrepancy is O(h^2) on smooth data.
    """
    g = field.grid
    v = field.values
    h = g.spacing

    def dx(a):
        return (_shift(a, 1, 0) - _shift(a, -1, 0)) / (2.0 * h)

    def dy(a):
        return (_shift(a, 0, 1) - _shift(a, 0, -1)) / (2.0 * h)

    def dxx(a):
        return (_shift(a, 1, 0) - 2.0 * a + _shift(a, -1, 0)) / (h * h)

    def dyy(a):
        return (_shift(a, 0, 1) - 2.0 * a + _shift(a, 0, -1)) / (h * h)

    def dxy(a):
        return (
            _shift(a, 1, 1) - _shift(a, 1, -1) - _shift(a, -1, 1) + _shift(a, -1, -1)
        ) / (4.0 * h * h)

    with np.errstate(invalid="ignore"):
        p1, p2 = dx(v), dy(v)
        w2 = 1.0 - p1 * p1 - p2 * p2
        w2 = np.where(w2 > 0.0, w2, np.nan)
        w = np.sqrt(w2)
        a11 = 1.0 + p1 * p1 / w2
        a22 = 1.0 + p2 * p2 / w2
        a12 = p1 * p2 / w2

        u = _SymDict({"11": dxx(v), "22": dyy(v), "12": dxy(v)})
        lhs = {"11": dxx(w), "22": dyy(w), "12": dxy(w)}
        third = _SymDict()
        for key in ("11", "22", "12"):
            third["1" + key] = dx(u[key])
            third["2" + key] = dy(u[key])

        worst = 0.0
        scale = 1.0
        count = 0
        for key in ("11", "12", "22"):
            i, j = key[0], key[1]
            transport = (p1 * third["1" + key] + p2 * third["2" + key]) / w
            s = (
                a11 * u["1" + i] * u["1" + j]
                + a12 * (u["1" + i] * u["2" + j] + u["2" + i] * u["1" + j])
                + a22 * u["2" + i] * u["2" + j]
            )
            rhs = -transport - s / w
            diff = np.abs(lhs[key] - rhs)
            ok = np.isfinite(diff) & np.isfinite(rhs)
            count = max(count, int(ok.sum()))
            if np.any(ok):
                worst = max(worst, float(np.max(diff[ok])))
                scale = max(scale, float(np.max(np.abs(rhs[ok]))))

    if count == 0:
        raise ValueError("grid too small for the identity check")
    return worst / scale


# ---------------------------------------------------------------------------
# sparse operator assembly for grids with boundary closures


@dataclass
class OperatorSet:
    """Sparse first, second and mixed derivative operators on active nodes.

    Derivatives of a field vector u with boundary values gvec are affine:

        du/dx   ~ d1x @ u + b1x @ gvec        (same pattern for y)
        d2u/dx2 ~ d2x @ u + b2x @ gvec
        d2u/dxy ~ dxy @ u                     (active nodes only)

    bpts holds the boundary sample points, one per boundary arm.
    """

    index: np.ndarray
    pts: np.ndarray
    bpts: np.ndarray
    d1x: sp.csr_matrix
    d1y: sp.csr_matrix
    d2x: sp.csr_matrix
    d2y: sp.csr_matrix
    dxy: sp.csr_matrix
    b1x: sp.csr_matrix
    b1y: sp.csr_matrix
    b2x: sp.csr_matrix
    b2y: sp.csr_matrix

    @property
    def n_active(self):
        return self.pts.shape[0]

    @property
    def n_boundary(self):
        return self.bpts.shape[0]

    def scatter(self, grid, u):
        vals = np.full((grid.nx, grid.ny), np.nan)
        vals[grid.active] = u
        return vals

    def gradient_values(self, u, gvec):
        p1 = self.d1x @ u + self.b1x @ gvec
        p2 = self.d1y @ u + self.b1y @ gvec
        return p1, p2

    def second_values(self, u, gvec):
        u11 = self.d2x @ u + self.b2x @ gvec
        u22 = self.d2y @ u + self.b2y @ gvec
        u12 = self.dxy @ u
        return u11, u22, u12


def build_operators(grid: Grid2) -> OperatorSet:
    """Assemble the OperatorSet for a grid whose cut arms carry data.

    Every active node must have, per axis, either an active neighbor or a
    boundary arm on each side; discretize() guarantees this for convex
    domains.
    """
    act = grid.active
    nx, ny, h = grid.nx, grid.ny, grid.spacing
    ii, jj = np.nonzero(act)
    n = ii.size
    index = np.full((nx, ny), -1, dtype=np.int64)
    index[ii, jj] = np.arange(n)
    pts = np.stack(
        [grid.origin[0] + ii * h, grid.origin[1] + jj * h], axis=-1
    )

    def neighbor(di, dj):
        i2, j2 = ii + di, jj + dj
        ok = (i2 >= 0) & (i2 < nx) & (j2 >= 0) & (j2 < ny)
        out = np.full(n, -1, dtype=np.int64)
        out[ok] = index[i2[ok], j2[ok]]
        return out

    th = grid.theta[ii, jj, :]
    bm = grid.barm[ii, jj, :]

    # one boundary column per boundary arm
    bcol = np.full((n, 4), -1, dtype=np.int64)
    nb = int(bm.sum())
    bcol[bm] = np.arange(nb)
    bxy = []
    for a, (di, dj) in enumerate(ARM_STEPS):
        rows = np.nonzero(bm[:, a])[0]
        if rows.size:
            px = grid.origin[0] + (ii[rows] + di * th[rows, a]) * h
            py = grid.origin[1] + (jj[rows] + dj * th[rows, a]) * h
            bxy.append(np.stack([px, py, bcol[rows, a].astype(float)], axis=-1))
    if bxy:
        flat = np.concatenate(bxy, axis=0)
        order = np.argsort(flat[:, 2])
        bpts = flat[order][:, :2]
    else:
        bpts = np.zeros((0, 2))

    def axis_ops(arm_lo, arm_hi, step):
        nlo = neighbor(-step[0], -step[1])
        nhi = neighbor(step[0], step[1])
        lo_node = nlo >= 0
        hi_node = nhi >= 0
        lo_b = bm[:, arm_lo] & ~lo_node
        hi_b = bm[:, arm_hi] & ~hi_node
        if np.any(~(lo_node | lo_b)) or np.any(~(hi_node | hi_b)):
            bad = int(np.sum(~(lo_node | lo_b)) + np.sum(~(hi_node | hi_b)))
            raise DiscretizationError(
                f"{bad} active nodes lack an arm; grid has no closure there"
            )
        alo = np.where(lo_node, h, th[:, arm_lo] * h)
        ahi = np.where(hi_node, h, th[:, arm_hi] * h)
        c_lo2 = 2.0 / (alo * (alo + ahi))
        c_hi2 = 2.0 / (ahi * (alo + ahi))
        c_002 = -2.0 / (alo * ahi)
        c_lo1 = -ahi / (alo * (alo + ahi))
        c_hi1 = alo / (ahi * (alo + ahi))
        c_001 = (ahi - alo) / (alo * ahi)

        rows_all = np.arange(n)

        def pack(co_lo, co_hi, co_00):
            dr = [rows_all[lo_node], rows_all[hi_node], rows_all]
            dc = [nlo[lo_node], nhi[hi_node], rows_all]
            dv = [co_lo[lo_node], co_hi[hi_node], co_00]
            br = [rows_all[lo_b], rows_all[hi_b]]
            bc = [bcol[lo_b, arm_lo], bcol[hi_b, arm_hi]]
            bv = [co_lo[lo_b], co_hi[hi_b]]
            d = sp.coo_matrix(
                (np.concatenate(dv), (np.concatenate(dr), np.concatenate(dc))),
                shape=(n, n),
            ).tocsr()
            b = sp.coo_matrix(
                (np.concatenate(bv), (np.concatenate(br), np.concatenate(bc))),
                shape=(n, nb),
            ).tocsr()
            return d, b

        d2, b2 = pack(c_lo2, c_hi2, c_002)
        d1, b1 = pack(c_lo1, c_hi1, c_001)
        return d1, d2, b1, b2

    d1x, d2x, b1x, b2x = axis_ops(0, 1, (1, 0))
    d1y, d2y, b1y, b2y = axis_ops(2, 3, (0, 1))
    dxy = _mixed_operator(grid, index, ii, jj, neighbor)

    return OperatorSet(
        index=index,
        pts=pts,
        bpts=bpts,
        d1x=d1x,
        d1y=d1y,
        d2x=d2x,
        d2y=d2y,
        dxy=dxy,
        b1x=b1x,
        b1y=b1y,
        b2x=b2x,
        b2y=b2y,
    )


def _mixed_operator(grid, index, ii, jj, neighbor):
    n = ii.size
    h2 = grid.spacing ** 2
    npp, npm = neighbor(1, 1), neighbor(1, -1)
    nmp, nmm = neighbor(-1, 1), neighbor(-1, -1)
    np0, nm0 = neighbor(1, 0), neighbor(-1, 0)
    n0p, n0m = neighbor(0, 1), neighbor(0, -1)

    rows, cols, vals = [], [], []
    rows_all = np.arange(n)

    def add(mask, pairs):
        r = rows_all[mask]
        for colarr, coeff in pairs:
            c = colarr[mask] if isinstance(colarr, np.ndarray) else r
            rows.append(r)
            cols.append(c)
            vals.append(np.full(r.size, coeff))

    cross = (npp >= 0) & (npm >= 0) & (nmp >= 0) & (nmm >= 0)
    axes = (np0 >= 0) & (nm0 >= 0) & (n0p >= 0) & (n0m >= 0)
    pair_a = ~cross & axes & (npp >= 0) & (nmm >= 0)
    pair_b = ~cross & ~pair_a & axes & (npm >= 0) & (nmp >= 0)
    used = cross | pair_a | pair_b

    add(cross, [(npp, 0.25 / h2), (nmm, 0.25 / h2), (npm, -0.25 / h2), (nmp, -0.25 / h2)])
    add(
        pair_a,
        [
            (npp, 0.5 / h2),
            (nmm, 0.5 / h2),
            (np0, -0.5 / h2),
            (nm0, -0.5 / h2),
            (n0p, -0.5 / h2),
            (n0m, -0.5 / h2),
            (None, 1.0 / h2),
        ],
    )
    add(
        pair_b,
        [
            (np0, 0.5 / h2),
            (nm0, 0.5 / h2),
            (n0p, 0.5 / h2),
            (n0m, 0.5 / h2),
            (npm, -0.5 / h2),
            (nmp, -0.5 / h2),
            (None, -1.0 / h2),
        ],
    )
    singles = [
        ((npp, np0, n0p), 1.0),
        ((nmm, nm0, n0m), 1.0),
        ((npm, np0, n0m), -1.0),
        ((nmp, nm0, n0p), -1.0),
    ]
    todo = ~used
    for (ncorner, na, nbv), sgn in singles:
        mask = todo & (ncorner >= 0) & (na >= 0) & (nbv >= 0)
        add(
            mask,
            [
                (ncorner, sgn / h2),
                (na, -sgn / h2),
                (nbv, -sgn / h2),
                (None, sgn / h2),
            ],
        )
        todo &= ~mask
    if np.any(todo):
        # tip slivers: a node whose only active axis neighbor leaves no
        # corner triple.  For a C^2 boundary such nodes sit O(h^2) from
        # the boundary (cap depth of a chord of length <= 2h), so a zero
        # mixed row costs O(h^2) globally.  Nodes without boundary arms
        # are genuine holes and rejected.
        no_data = todo & ~np.any(grid.barm[ii, jj, :], axis=-1)
        if np.any(no_data):
            raise DiscretizationError(
                f"{int(no_data.sum())} nodes admit no mixed derivative "
                "stencil and carry no boundary data; refine the grid"
            )
    if rows:
        mat = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n, n),
        ).tocsr()
    else:
        mat = sp.csr_matrix((n, n))
    return mat


# ---------------------------------------------------------------------------
# serialization: CSV of active nodes plus a JSON sidecar


def save_field(field: ScalarField, path, params: SolitonParams | None = None):
    """Write x,y,u rows for active nodes (17 significant digits) and a
    sidecar JSON with grid metadata next to it."""
    path = Path(path)
    g = field.grid
    act = g.active
    xs, ys = g.points()
    with open(path, "w") as fh:
        fh.write("x,y,u\n")
        for j in range(g.ny):
            for i in range(g.nx):
                if act[i, j]:
                    fh.write(
                        f"{xs[i, j]:.17g},{ys[i, j]:.17g},{field.values[i, j]:.17g}\n"
                    )
    meta = {
        "origin": [g.origin[0], g.origin[1]],
        "spacing": g.spacing,
        "nx": g.nx,
        "ny": g.ny,
        "C": params.c if params is not None else None,
        "n": params.dim if params is not None else None,
    }
    with open(path.with_suffix(".json"), "w") as fh:
        json.dump(meta, fh, indent=1)
    return path


def load_field(path):
    """Read a field written by save_field.

    Returns (ScalarField, SolitonParams | None).  Node classes are
    reconstructed from the active mask; cut fractions are not serialized,
    so loaded cut nodes fall back to one-sided stencils.
    """
    path = Path(path)
    with open(path.with_suffix(".json")) as fh:
        meta = json.load(fh)
    origin = (float(meta["origin"][0]), float(meta["origin"][1]))
    h = float(meta["spacing"])
    nx, ny = int(meta["nx"]), int(meta["ny"])
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    vals = np.full((nx, ny), np.nan)
    iidx = np.rint((data[:, 0] - origin[0]) / h).astype(int)
    jidx = np.rint((data[:, 1] - origin[1]) / h).astype(int)
    if np.any((iidx < 0) | (iidx >= nx) | (jidx < 0) | (jidx >= ny)):
        raise ValueError("CSV rows fall outside the grid in the sidecar")
    vals[iidx, jidx] = data[:, 2]
    act = np.isfinite(vals)
    cls = np.full((nx, ny), EXTERIOR, dtype=np.int8)
    full = (
        _shift(act, 1, 0, fill=False)
        & _shift(act, -1, 0, fill=False)
        & _shift(act, 0, 1, fill=False)
        & _shift(act, 0, -1, fill=False)
    )
    cls[act & full] = INTERIOR
    cls[act & ~full] = CUT
    grid = Grid2(
        origin,
        h,
        nx,
        ny,
        cls,
        np.ones((nx, ny, 4)),
        np.zeros((nx, ny, 4), dtype=bool),
    )
    params = None
    if meta.get("C") is not None:
        params = SolitonParams(float(meta["C"]), int(meta.get("n") or 2))
    return ScalarField(grid, vals), params
