"""Graphical flow relaxing toward downward translators.

The evolution is du/dt = a^ij u_ij - C w, so a solution of the soliton
equation moves rigidly at speed -1 (u(x, t) = u0(x) - t) and the
Dirichlet data must translate with it, g(t) = g0 - t.  Explicit Euler
steps are capped by the parabolic CFL bound dt <= sigma h^2 w_min^2,
since the largest coefficient eigenvalue is 1/w^2.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as _dfield

import numpy as np

from .errors import FlowBlowupError
from .geometry import EPS_SPACE, ScalarField
from .elliptic import (
    DirichletProblem,
    DiscreteProblem,
    _gradient_sq_max,
    discretize,
    residual_vector,
)

DEFAULT_SIGMA = 0.25


@dataclass
class FlowState:
    dp: DiscreteProblem
    u: np.ndarray
    t: float
    g0: np.ndarray
    translate_boundary: bool = True
    dt_last: float = 0.0

    def gvec(self, t=None):
        tt = self.t if t is None else t
        return self.g0 - tt if self.translate_boundary else self.g0

    def field(self) -> ScalarField:
        return self.dp.field(self.u)

    @property
    def params(self):
        return self.dp.problem.params


def initial_state(problem, initial=None, translate_boundary=True) -> FlowState:
    """Discretize (with the boundary snapped to the lattice, which the
    explicit stepping needs for stability) and wrap an initial graph.

    initial may be None (boundary-consistent default), a callable on
    points, a ScalarField on the same grid, or a vector on active nodes.
    A DiscreteProblem passes through untouched: build it with
    snap_boundary=True or accept cut cell stiffness.
    """
    dp = (
        problem
        if isinstance(problem, DiscreteProblem)
        else discretize(problem, snap_boundary=True)
    )
    if initial is None:
        u = dp.default_initial()
    elif isinstance(initial, ScalarField):
        u = initial.values[dp.grid.active].copy()
    elif callable(initial):
        u = dp.sample(initial)
    else:
        u = np.asarray(initial, dtype=float).copy()
    if u.shape != (dp.n_active,):
        raise ValueError("initial graph does not match the active node count")
    return FlowState(dp, u, 0.0, dp.gvec.copy(), translate_boundary, 0.0)


def speed_vector(state: FlowState):
    """du/dt on active nodes plus the residual and w of the iterate."""
    res, parts = residual_vector(state.dp, state.u, gvec=state.gvec())
    return res - 1.0, res, parts


def cfl_dt(state: FlowState, sigma=DEFAULT_SIGMA):
    _, _, parts = speed_vector(state)
    wmin = float(np.min(parts["w"]))
    return sigma * state.dp.grid.spacing ** 2 * wmin ** 2


def step(state: FlowState, dt=None, sigma=DEFAULT_SIGMA, dt_min=1e-12) -> FlowState:
    """One explicit Euler step; dt is halved until the new graph stays
    strictly spacelike, FlowBlowupError below dt_min."""
    speed, _, parts = speed_vector(state)
    wmin = float(np.min(parts["w"]))
    limit = sigma * state.dp.grid.spacing ** 2 * wmin ** 2
    dt_try = limit if dt is None else min(float(dt), limit)
    while dt_try >= dt_min:
        cand = state.u + dt_try * speed
        gv = state.gvec(state.t + dt_try)
        if _gradient_sq_max(state.dp, cand, gv) < (1.0 - EPS_SPACE) ** 2:
            return FlowState(
                state.dp, cand, state.t + dt_try, state.g0,
                state.translate_boundary, dt_try,
            )
        dt_try *= 0.5
    raise FlowBlowupError(
        f"graph leaves the spacelike cone at t = {state.t:.6g} even for dt < {dt_min}"
    )


@dataclass
class FlowRun:
    times: list
    residual_norm: list
    drift_full: list
    drift_inner: list
    n_steps: int
    drift_radius: float | None = None

    def save_json(self, path):
        doc = {
            "times": self.times,
            "residual_norm": self.residual_norm,
            "drift_full": self.drift_full,
            "drift_inner": self.drift_inner,
            "n_steps": self.n_steps,
            "drift_radius": self.drift_radius,
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=1)

    def save_csv(self, path):
        rows = np.column_stack(
            [self.times, self.residual_norm, self.drift_full, self.drift_inner]
        )
        np.savetxt(
            path, rows, delimiter=",", header="t,residual,drift,drift_inner", comments=""
        )


def run_to(
    state: FlowState,
    t_end,
    n_snapshots=5,
    sigma=DEFAULT_SIGMA,
    dt=None,
    drift_radius=None,
    drift_center=(0.0, 0.0),
):
    """March to t_end recording snapshots of r(t) = max |residual| / w
    and the translation drift max |u(t) + (t - t0) - u(t0)|.

    drift_radius restricts the inner drift to |x - center| <= radius
    (defaults to the full active set).  Returns (final state, FlowRun).
    """
    t0 = state.t
    u0 = state.u.copy()
    pts = state.dp.ops.pts
    if drift_radius is None:
        inner = np.ones(pts.shape[0], dtype=bool)
    else:
        inner = (pts[:, 0] - drift_center[0]) ** 2 + (
            pts[:, 1] - drift_center[1]
        ) ** 2 <= drift_radius ** 2
        if not np.any(inner):
            raise ValueError("drift radius excludes every active node")

    def record(st, run):
        _, res, parts = speed_vector(st)
        run.times.append(st.t)
        run.residual_norm.append(float(np.max(np.abs(res) / parts["w"])))
        dev = np.abs(st.u + (st.t - t0) - u0)
        run.drift_full.append(float(np.max(dev)))
        run.drift_inner.append(float(np.max(dev[inner])))

    run = FlowRun([], [], [], [], 0, drift_radius)
    record(state, run)
    marks = np.linspace(t0, float(t_end), n_snapshots + 1)[1:]
    for mark in marks:
        while state.t < mark - 1e-14:
            state = step(state, dt=min(dt, mark - state.t) if dt else mark - state.t,
                         sigma=sigma)
            run.n_steps += 1
        record(state, run)
    return state, run
