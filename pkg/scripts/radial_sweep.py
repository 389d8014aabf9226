"""Sweep the rotationally symmetric profiles over (C, n).

For each pair the far field fit phi ~ slope r + logcoef log r + offset
is tabulated against the predicted slope sqrt(C^2 - 1) / C and log
coefficient -(n - 1) / C^2, and phi''(0) against (C - 1) / n.

    python3 scripts/radial_sweep.py --r-max 200 --out radial_sweep.csv
"""

import argparse
import math
import sys

sys.path.insert(0, "src")

from solitonlab import SolitonParams, solve_radial


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--c-values", default="1.5,2,3,5", help="comma separated C > 1")
    ap.add_argument("--n-values", default="1,2,3,4", help="comma separated dimensions")
    ap.add_argument("--r-max", type=float, default=200.0)
    ap.add_argument("--out", default=None, help="optional CSV path")
    args = ap.parse_args(argv)

    cs = [float(s) for s in args.c_values.split(",")]
    ns = [int(s) for s in args.n_values.split(",")]

    rows = []
    hdr = f"{'C':>6} {'n':>3} {'slope':>10} {'pred':>10} {'logcoef':>10} {'pred':>10} {'phi00':>10} {'pred':>10}"
    print(hdr)
    print("-" * len(hdr))
    for c in cs:
        for n in ns:
            p = solve_radial(SolitonParams(c, n), args.r_max)
            ct = math.sqrt(c * c - 1.0) / c
            lc = -(n - 1) / (c * c)
            curv = (c - 1.0) / n
            print(
                f"{c:6.2f} {n:3d} {p.fit.slope:10.6f} {ct:10.6f} "
                f"{p.fit.logcoef:10.6f} {lc:10.6f} "
                f"{p.origin_curvature:10.6f} {curv:10.6f}"
            )
            rows.append((c, n, p.fit.slope, ct, p.fit.logcoef, lc, p.origin_curvature, curv))

    if args.out:
        with open(args.out, "w") as fh:
            fh.write("C,n,slope,slope_pred,logcoef,logcoef_pred,curv0,curv0_pred\n")
            for r in rows:
                fh.write(",".join(f"{v:.10g}" for v in r) + "\n")
        print(f"\nwrote {args.out}")


if __name__ == "__main__":
    main()
