"""Explicit stepping toward the translator.

Closed forms: a flat graph moves at speed -C (zero curvature, w = 1),
a plane of slope ctilde moves at exactly -1, and a solved soliton
translates rigidly so u(t) + t - u(0) stays at rounding while the
normalized residual r(t) = max |residual| / w stays at the Newton tol.
"""

import numpy as np
import pytest

import solitonlab as sl
import solitonlab.elliptic as ell
import solitonlab.flow as flo
from solitonlab import (
    BoundarySpec,
    ConvexDomain,
    DirichletProblem,
    FlowBlowupError,
    SolitonParams,
)

PARAMS = SolitonParams(2.0, 2)


@pytest.fixture(scope="module")
def disk_dp():
    prob = DirichletProblem(
        PARAMS, ConvexDomain.disk((0.0, 0.0), 4.0), BoundarySpec.const(0.0), h=0.1
    )
    return ell.discretize(prob, snap_boundary=True)


@pytest.fixture(scope="module")
def soliton(disk_dp):
    field, rep = sl.newton_solve(disk_dp)
    assert rep.converged
    return field


def test_flat_graph_moves_at_speed_c(disk_dp):
    st = flo.initial_state(disk_dp, initial=np.zeros(disk_dp.n_active))
    speed, res, parts = flo.speed_vector(st)
    assert np.max(np.abs(speed + PARAMS.c)) < 1e-13
    assert np.max(np.abs(parts["w"] - 1.0)) == 0.0


def test_plane_moves_at_unit_speed():
    ct = PARAMS.ctilde
    dom = ConvexDomain.polygon([(-2, -2), (2, -2), (2, 2), (-2, 2)])
    prob = DirichletProblem(PARAMS, dom, BoundarySpec.linear((ct, 0.0)), h=0.25)
    st = flo.initial_state(prob, initial=lambda p: ct * p[..., 0])
    speed, _, _ = flo.speed_vector(st)
    assert np.max(np.abs(speed + 1.0)) < 1e-12
    st2 = flo.step(st)
    assert st2.t == st2.dt_last > 0.0
    assert np.max(np.abs(st2.u - (st.u - st2.t))) < 1e-14


def test_soliton_translates_rigidly(disk_dp, soliton):
    st = flo.initial_state(disk_dp, initial=soliton)
    st2, run = flo.run_to(st, 0.1, n_snapshots=4, drift_radius=2.0)
    assert max(run.residual_norm) < 1e-9
    assert max(run.drift_full) < 1e-10
    assert max(run.drift_inner) < 1e-10
    assert run.n_steps > 100
    assert st2.t == pytest.approx(0.1, abs=1e-12)


def test_perturbed_graph_relaxes(disk_dp, soliton):
    pts = disk_dp.ops.pts
    bump = 0.05 * np.exp(-(pts[:, 0] ** 2 + pts[:, 1] ** 2))
    st = flo.initial_state(disk_dp, initial=soliton.values[disk_dp.grid.active] + bump)
    _, run = flo.run_to(st, 0.3, n_snapshots=5, drift_radius=2.0)
    r = run.residual_norm
    assert len(r) == 6
    assert all(b < a for a, b in zip(r, r[1:]))


def test_cfl_cap(disk_dp, soliton):
    st = flo.initial_state(disk_dp, initial=soliton)
    limit = flo.cfl_dt(st)
    assert limit <= 0.25 * 0.1 ** 2
    st2 = flo.step(st, dt=1.0)
    assert st2.dt_last <= limit * (1.0 + 1e-12)


def test_blowup_guard(disk_dp, soliton):
    st = flo.initial_state(disk_dp, initial=soliton)
    with pytest.raises(FlowBlowupError):
        flo.step(st, dt_min=1.0)


def test_initial_state_variants(disk_dp, soliton):
    vec = soliton.values[disk_dp.grid.active]
    st_field = flo.initial_state(disk_dp, initial=soliton)
    st_vec = flo.initial_state(disk_dp, initial=vec.copy())
    assert np.array_equal(st_field.u, st_vec.u)
    st_default = flo.initial_state(disk_dp)
    assert st_default.u.shape == (disk_dp.n_active,)
    with pytest.raises(ValueError):
        flo.initial_state(disk_dp, initial=vec[:-1])


def test_pinned_boundary_breaks_translation(disk_dp, soliton):
    st = flo.initial_state(disk_dp, initial=soliton, translate_boundary=False)
    assert np.array_equal(st.gvec(5.0), st.g0)
    _, run = flo.run_to(st, 0.05, n_snapshots=2)
    # with the boundary held fixed the graph cannot translate rigidly
    assert run.drift_full[-1] > 1e-3


def test_run_report_files(tmp_path, disk_dp, soliton):
    st = flo.initial_state(disk_dp, initial=soliton)
    _, run = flo.run_to(st, 0.02, n_snapshots=2, drift_radius=2.0)
    jpath = tmp_path / "run.json"
    cpath = tmp_path / "run.csv"
    run.save_json(jpath)
    run.save_csv(cpath)
    import json

    doc = json.loads(jpath.read_text())
    assert doc["n_steps"] == run.n_steps
    assert len(doc["times"]) == 3
    data = np.loadtxt(cpath, delimiter=",", skiprows=1)
    assert data.shape == (3, 4)
    with pytest.raises(ValueError):
        flo.run_to(st, 0.02, drift_radius=1e-6, drift_center=(0.033, 0.041))
