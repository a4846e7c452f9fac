"""Scan the uniform n-bound over A and eps.

Usage: python scripts/kesten_scan.py [--x-max 1000] [--step 0.01] [--n-max 8]

Prints s_n/(1+eps)^n for each (A, eps) pair together with the first n from
which the sequence stops increasing.  A defaults to the smallness threshold
(sup of F_bar^2 / F(x, x+1] at most 1) plus a few larger values.
"""

import argparse
import sys

from subexp2.diagnostics import kesten_bound_check, smallness_threshold
from subexp2.lattice import LatticeBracket
from subexp2.models import make_model


def run(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--family", default="pareto")
    ap.add_argument("--x-max", type=float, default=1000.0)
    ap.add_argument("--step", type=float, default=0.01)
    ap.add_argument("--n-max", type=int, default=8)
    ap.add_argument("--eps", type=float, nargs="+", default=[0.25, 0.5, 1.0])
    ap.add_argument("--A", type=float, nargs="*", default=[10.0, 50.0, 200.0])
    args = ap.parse_args(argv)
    model = make_model(args.family)
    br = LatticeBracket(model, args.step, args.x_max)
    a0 = smallness_threshold(model, args.x_max, args.step)
    print(f"{model!r}: smallness threshold A = {a0:g}")
    for A in [a0, *args.A]:
        for eps in args.eps:
            res = kesten_bound_check(br, model, eps, A, args.n_max)
            seq = " ".join(f"{res.scaled[n]:8.3g}" for n in range(2, args.n_max + 1))
            print(f"A={A:<7g} eps={eps:<5g} n0={res.n0!s:<5} pass={res.passed!s:<6} beta_ok={res.lower_bound_ok!s:<6} [{seq}]", flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(run())
