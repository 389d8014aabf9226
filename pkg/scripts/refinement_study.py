"""Grid refinement study for the Dirichlet solver on a disk.

With zero boundary data on |x| <= R the solution is the radial profile
translated to vanish on the boundary, so the solver error is measurable
exactly.  Prints the max norm error per spacing and the observed
convergence order between consecutive levels (the scheme is second
order away from roundoff).

    python3 scripts/refinement_study.py --radius 4 --spacings 0.2,0.1,0.05
"""

import argparse
import math
import sys
import time

import numpy as np

sys.path.insert(0, "src")

from solitonlab import (
    BoundarySpec,
    ConvexDomain,
    DirichletProblem,
    SolitonParams,
    newton_solve,
    solve_radial,
)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--c", type=float, default=2.0)
    ap.add_argument("--radius", type=float, default=4.0)
    ap.add_argument("--spacings", default="0.2,0.1,0.05")
    args = ap.parse_args(argv)

    params = SolitonParams(args.c, 2)
    hs = [float(s) for s in args.spacings.split(",")]
    profile = solve_radial(params, max(4.0 * args.radius, 40.0))
    psi_b = profile(args.radius)

    print(f"{'h':>8} {'active':>9} {'iters':>6} {'max err':>12} {'order':>7} {'sec':>7}")
    prev = None
    for h in hs:
        t0 = time.perf_counter()
        prob = DirichletProblem(
            params, ConvexDomain.disk((0.0, 0.0), args.radius), BoundarySpec.const(0.0), h=h
        )
        field, rep = newton_solve(prob)
        dt = time.perf_counter() - t0
        g = field.grid
        x, y = g.points()
        act = g.active
        err = float(np.max(np.abs(field.values[act] - (profile(np.hypot(x[act], y[act])) - psi_b))))
        order = math.log(prev[1] / err) / math.log(prev[0] / h) if prev else float("nan")
        print(f"{h:8.4f} {rep.n_active:9d} {rep.iterations:6d} {err:12.4e} {order:7.3f} {dt:7.2f}")
        prev = (h, err)


if __name__ == "__main__":
    main()
