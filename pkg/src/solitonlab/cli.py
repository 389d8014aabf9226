"""Command line front end.

Every subcommand writes summary.json into --out with the shape

    {"command", "params", "seed", "metrics", "checks": [{name, value,
     tolerance, pass}]}

and the process exits 0 when all checks pass, 1 when some check fails,
2 on usage or runtime errors.  Domains, boundary data and angular data
use small spec strings, e.g. disk:0,0,4  polygon:0,0;4,0;4,4;0,4
const:0  linear:0.5,0,1  cos:amp=0.3,freq=2  csv:path.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field as _dfield
from pathlib import Path

import numpy as np

from . import construct as con
from . import elliptic as ell
from . import flow as flo
from . import radial as rad
from .errors import NotConvexError, SolitonLabError
from .geometry import (
    SolitonParams,
    bundle,
    load_field,
    residual as field_residual,
    save_field,
)


# ---------------------------------------------------------------------------
# spec string parsers


def parse_domain(spec: str) -> ell.ConvexDomain:
    kind, _, rest = spec.partition(":")
    if kind == "disk":
        vals = [float(v) for v in rest.split(",")] if rest else []
        if len(vals) == 1:
            return ell.ConvexDomain.disk((0.0, 0.0), vals[0])
        if len(vals) == 3:
            return ell.ConvexDomain.disk((vals[0], vals[1]), vals[2])
        raise ValueError("disk spec is disk:r or disk:cx,cy,r")
    if kind == "polygon":
        verts = [[float(v) for v in pair.split(",")] for pair in rest.split(";")]
        return ell.ConvexDomain.polygon(verts)
    raise ValueError(f"unknown domain kind {kind!r}")


def parse_boundary(spec: str) -> ell.BoundarySpec:
    kind, _, rest = spec.partition(":")
    if kind == "const":
        return ell.BoundarySpec.const(float(rest or 0.0))
    if kind == "linear":
        vals = [float(v) for v in rest.split(",")]
        if len(vals) == 2:
            vals.append(0.0)
        return ell.BoundarySpec.linear((vals[0], vals[1]), vals[2])
    if kind == "table":
        return ell.BoundarySpec.table(np.loadtxt(rest, delimiter=",", skiprows=1, ndmin=2))
    raise ValueError(f"unknown boundary kind {kind!r}")


def parse_sphere(spec: str, ctilde: float, n_angles: int) -> con.SphereFunction:
    kind, _, rest = spec.partition(":")
    if kind == "const":
        return con.SphereFunction.constant(ctilde, float(rest or 0.0), n_angles)
    if kind == "cos":
        opts = dict(kv.split("=") for kv in rest.split(",")) if rest else {}
        return con.SphereFunction.cosine(
            ctilde,
            float(opts.get("amp", 0.3)),
            int(opts.get("freq", 1)),
            n_angles,
        )
    if kind == "csv":
        return con.SphereFunction.from_csv(rest, ctilde, n_angles)
    raise ValueError(f"unknown angular data kind {kind!r}")


def _check(name, value, tolerance, ok):
    return {"name": name, "value": value, "tolerance": tolerance, "pass": bool(ok)}


def _le(name, value, tolerance):
    return _check(name, float(value), float(tolerance), value <= tolerance)


def _ge(name, value, bound):
    return _check(name, float(value), float(bound), value >= bound)


# ---------------------------------------------------------------------------
# subcommands; each returns (metrics, checks)


def _cmd_radial(o, out):
    params = SolitonParams(o["C"], o["n"])
    profile = rad.solve_radial(params, r_max=o["r_max"], tol=o["tol"])
    profile.save_csv(out / "profile.csv")
    metrics = {
        "r_max": profile.r_max,
        "origin_curvature": profile.origin_curvature,
        "expected_origin_curvature": (params.c - 1.0) / params.dim,
    }
    checks = [
        _le(
            "origin_curvature",
            abs(profile.origin_curvature - (params.c - 1.0) / params.dim),
            1e-6,
        )
    ]
    if profile.fit is not None:
        rad.save_fit_report(profile, out / "fit.json")
        expected_log = -(params.dim - 1) / params.c ** 2
        metrics.update(
            slope=profile.fit.slope,
            logcoef=profile.fit.logcoef,
            offset=profile.fit.offset,
            expected_logcoef=expected_log,
        )
        checks.append(_le("slope_error", abs(profile.fit.slope - params.ctilde), 1e-3))
        checks.append(
            _le(
                "logcoef_error",
                abs(profile.fit.logcoef - expected_log),
                max(0.1 * abs(expected_log), 1e-2),
            )
        )
    return metrics, checks


def _build_problem(o):
    if o.get("config"):
        return ell.problem_from_json(o["config"])
    return ell.DirichletProblem(
        params=SolitonParams(o["C"], 2),
        domain=parse_domain(o["domain"]),
        boundary=parse_boundary(o["boundary"]),
        h=o["h"],
        tol=o["tol"],
    )


def _cmd_dirichlet(o, out):
    problem = _build_problem(o)
    field, report = ell.newton_solve(problem)
    save_field(field, out / "solution.csv", problem.params)
    grad = ell.gradient_bound_check(field, problem.params)
    metrics = {
        "iterations": report.iterations,
        "final_residual": report.residual_history[-1],
        "spacelike_margin": report.spacelike_margin,
        "n_active": report.n_active,
        "max_gradient": grad.max_gradient,
        "notes": report.notes,
    }
    checks = [
        _check("converged", report.residual_history[-1], problem.tol, report.converged),
        _ge("spacelike_margin", report.spacelike_margin, 0.0),
        _le("gradient_bound", grad.max_gradient, grad.bound),
    ]
    return metrics, checks


def _cmd_construct(o, out):
    params = SolitonParams(o["C"], 2)
    profile = rad.solve_radial(params, r_max=o["r_max"], tol=o["tol"])
    sphere = parse_sphere(o["f"], params.ctilde, o["n_angles"])
    levels = [float(v) for v in o["levels"].split(",")]
    result = con.exhaustion_construct(
        profile,
        sphere,
        levels=levels,
        h=o["h"],
        compact_radius=o["compact_radius"],
        newton_tol=o["newton_tol"],
    )
    save_field(result.final, out / "final.csv", params)
    metrics = {
        "levels": result.levels,
        "m_bound": result.envelopes.m_bound,
        "cauchy_gaps": result.cauchy_gaps,
        "monotone_margins": result.monotone_margins,
        "sandwich_violations": result.sandwich_violations,
        "iterations": [r.iterations for r in result.reports],
    }
    gaps = result.cauchy_gaps
    checks = [
        _check(
            "cauchy_decreasing",
            gaps[-1] if gaps else 0.0,
            gaps[0] if gaps else 0.0,
            all(b < a for a, b in zip(gaps, gaps[1:])) if len(gaps) > 1 else True,
        ),
        _ge("monotone_margin", min(result.monotone_margins), -1e-8),
        _le("sandwich_violation", max(result.sandwich_violations), 1e-2 * (1.0 + o["h"])),
    ]
    return metrics, checks


def _cmd_blowdown(o, out):
    field, params = load_field(o["input"])
    if params is None:
        if o.get("C") is None:
            raise ValueError("field file has no parameter sidecar; pass --C")
        params = SolitonParams(o["C"], 2)
    heights = [float(v) for v in o["heights"].split(",")] if o.get("heights") else None
    checks = []
    try:
        cone = con.blowdown(field, heights=heights, n_dirs=o["n_dirs"])
        checks.append(_check("convexity", 0.0, 0.0, True))
    except NotConvexError as exc:
        return {"error": str(exc)}, [_check("convexity", 1.0, 0.0, False)]
    eik = con.eikonal_check(cone, params.ctilde)
    th = np.arctan2(cone.directions[:, 1], cone.directions[:, 0])
    np.savetxt(
        out / "cone.csv",
        np.column_stack([th, cone.values]),
        delimiter=",",
        header="phi,V",
        comments="",
    )
    metrics = {
        "h_used": cone.h_used.tolist(),
        "cone_mean": float(np.mean(cone.values)),
        "cone_std": float(np.std(cone.values)),
        "eikonal_error": eik.max_rel_error,
        "excluded_fraction": eik.excluded_fraction,
    }
    checks.append(_le("eikonal", eik.max_rel_error, 0.02))
    return metrics, checks


def _cmd_verify(o, out):
    field, params = load_field(o["input"])
    if o.get("C") is not None:
        params = SolitonParams(o["C"], o.get("n") or 2)
    if params is None:
        raise ValueError("field file has no parameter sidecar; pass --C")
    h = field.grid.spacing
    b = bundle(field, params)
    res = field_residual(field, params)
    interior = field.grid.interior
    gn = np.hypot(b.du[:, :, 0], b.du[:, :, 1])
    metrics = {
        "h": h,
        "max_residual": float(np.nanmax(np.abs(res.values[interior]))),
        "max_gradient": float(np.nanmax(np.where(field.grid.active, gn, np.nan))),
        "min_mean_curvature": float(np.nanmin(b.mean_h[interior])),
        "min_hessian_eig": float(np.nanmin(b.lam_min[interior])),
        "max_asq": float(np.nanmax(b.norm_a_sq[interior])),
    }
    checks = [
        _le("residual", metrics["max_residual"], o["residual_tol"]),
        _check(
            "spacelike",
            metrics["max_gradient"],
            1.0,
            metrics["max_gradient"] < 1.0 - 1e-8,
        ),
        _ge("meanconvex", metrics["min_mean_curvature"], -10.0 * h),
        _ge("convex", metrics["min_hessian_eig"], -10.0 * h),
        _le("asq", metrics["max_asq"], (params.c - 1.0) ** 2 + 10.0 * h),
    ]
    return metrics, checks


def _cmd_flow(o, out):
    problem = _build_problem(o)
    dp = ell.discretize(problem, snap_boundary=True)
    if o["initial"] == "solve":
        init_field, _ = ell.newton_solve(dp)
        initial = init_field
    elif o["initial"] == "barrier":
        initial = None
    else:
        initial = load_field(o["initial"])[0].interp
    state = flo.initial_state(dp, initial=initial)
    state, run = flo.run_to(
        state,
        o["t_end"],
        n_snapshots=o["snapshots"],
        sigma=o["sigma"],
        drift_radius=o.get("drift_radius"),
    )
    run.save_json(out / "flow.json")
    run.save_csv(out / "flow.csv")
    metrics = {
        "n_steps": run.n_steps,
        "times": run.times,
        "residual_norm": run.residual_norm,
        "drift_inner": run.drift_inner,
    }
    checks = [
        _le(
            "residual_nonincreasing",
            run.residual_norm[-1],
            run.residual_norm[0] * (1.0 + 1e-9) + 1e-12,
        )
    ]
    if o.get("drift_tol") is not None:
        checks.append(_le("drift", run.drift_inner[-1], o["drift_tol"]))
    return metrics, checks


_HANDLERS = {
    "radial": _cmd_radial,
    "dirichlet": _cmd_dirichlet,
    "construct": _cmd_construct,
    "blowdown": _cmd_blowdown,
    "verify": _cmd_verify,
    "flow": _cmd_flow,
}


# ---------------------------------------------------------------------------
# config plumbing


@dataclass
class RunConfig:
    command: str
    options: dict
    out_dir: Path
    seed: int = 42


def run(cfg: RunConfig) -> dict:
    """Programmatic entry; returns the summary dict written by main()."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    metrics, checks = _HANDLERS[cfg.command](cfg.options, out)
    summary = {
        "command": cfg.command,
        "params": {k: v for k, v in cfg.options.items() if v is not None},
        "seed": cfg.seed,
        "metrics": metrics,
        "checks": checks,
    }
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=1, default=str)
    return summary


def _parser():
    p = argparse.ArgumentParser(
        prog="soliton-lab",
        description="numerical laboratory for downward translating solitons",
    )
    p.add_argument("--out", default="run_output", help="output directory")
    p.add_argument("--seed", type=int, default=42)
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("radial", help="solve the rotationally symmetric profile")
    sp.add_argument("--C", type=float, required=True)
    sp.add_argument("--n", type=int, default=2)
    sp.add_argument("--r-max", dest="r_max", type=float, default=200.0)
    sp.add_argument("--tol", type=float, default=1e-10)

    sp = sub.add_parser("dirichlet", help="solve one Dirichlet problem")
    sp.add_argument("--config", help="problem description JSON")
    sp.add_argument("--C", type=float, default=2.0)
    sp.add_argument("--domain", default="disk:4")
    sp.add_argument("--boundary", default="const:0")
    sp.add_argument("--h", type=float, default=0.1)
    sp.add_argument("--tol", type=float, default=1e-10)

    sp = sub.add_parser("construct", help="exhaust an entire solution")
    sp.add_argument("--C", type=float, default=2.0)
    sp.add_argument("--f", default="const:0", help="angular data at infinity")
    sp.add_argument("--levels", default="10,20,40")
    sp.add_argument("--h", type=float, default=0.1)
    sp.add_argument("--n-angles", dest="n_angles", type=int, default=720)
    sp.add_argument("--compact-radius", dest="compact_radius", type=float, default=8.0)
    sp.add_argument("--r-max", dest="r_max", type=float, default=80.0)
    sp.add_argument("--newton-tol", dest="newton_tol", type=float, default=1e-8)
    sp.add_argument("--tol", type=float, default=1e-10, help="profile integration tol")

    sp = sub.add_parser("blowdown", help="blow down a saved field")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--C", type=float)
    sp.add_argument("--heights")
    sp.add_argument("--n-dirs", dest="n_dirs", type=int, default=360)

    sp = sub.add_parser("verify", help="pointwise checks on a saved field")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--C", type=float)
    sp.add_argument("--n", type=int)
    sp.add_argument("--residual-tol", dest="residual_tol", type=float, default=1e-6)

    sp = sub.add_parser("flow", help="explicit graphical flow")
    sp.add_argument("--config")
    sp.add_argument("--C", type=float, default=2.0)
    sp.add_argument("--domain", default="disk:4")
    sp.add_argument("--boundary", default="const:0")
    sp.add_argument("--h", type=float, default=0.1)
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.add_argument("--t-end", dest="t_end", type=float, default=0.5)
    sp.add_argument("--snapshots", type=int, default=5)
    sp.add_argument("--sigma", type=float, default=flo.DEFAULT_SIGMA)
    sp.add_argument("--initial", default="solve", help="solve | barrier | field csv")
    sp.add_argument("--drift-radius", dest="drift_radius", type=float)
    sp.add_argument("--drift-tol", dest="drift_tol", type=float)
    return p


def parse_args(argv=None) -> RunConfig:
    ns = _parser().parse_args(argv)
    opts = vars(ns)
    command = opts.pop("command")
    out = opts.pop("out")
    seed = opts.pop("seed")
    return RunConfig(command=command, options=opts, out_dir=Path(out), seed=seed)


def main(argv=None) -> int:
    try:
        cfg = parse_args(argv)
        summary = run(cfg)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (SolitonLabError, ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    ok = all(c["pass"] for c in summary["checks"])
    for c in summary["checks"]:
        flag = "pass" if c["pass"] else "FAIL"
        print(f"[{flag}] {c['name']}: value={c['value']:.6g} tol={c['tolerance']:.6g}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
