"""Growth of f_i - P_i/Q_n at a point where the lighter component is pushed.

The slope of log|f_i - P_i/Q_n| in |n| is compared with ell_i - V^{omega_i + omega}
at the probe point (negative there, so the approximants diverge).
"""

from __future__ import annotations

import argparse

import mpmath as mp
import numpy as np

from angelesco.asymptotics import RaySequence, evaluate_ray, make_context
from angelesco.weights import AngelescoSystem, WeightSpec


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--intervals", type=float, nargs=4, default=[-1, -0.05, 0.05, 3])
    ap.add_argument("--k", type=int, nargs=2, default=[7, 3])
    ap.add_argument("--m", type=int, default=5, help="largest multiple of k")
    ap.add_argument("--z", type=complex, default=0.134 + 0.2j)
    ap.add_argument("--component", type=int, default=2, help="1-based")
    args = ap.parse_args(argv)
    ivs = [tuple(args.intervals[:2]), tuple(args.intervals[2:])]
    i = args.component - 1
    sys = AngelescoSystem(tuple(WeightSpec(iv) for iv in ivs))
    ray = RaySequence.multiples(args.k, range(1, args.m + 1))
    ctx = make_context(sys, ray.c)
    cells = evaluate_ray(ctx, ray, [args.z])
    ns = [sum(c.index) for c in cells]
    logs = [float(mp.re(c.log_r[i] - c.log_q)) for c in cells]
    for n, c, v in zip(ns, cells, logs):
        print(f"{str(c.index):10s} |n|={n:3d}  log|f - P/Q| = {v:+.6f}")
    # e_pred = V^{omega_i + omega} - ell_i is the predicted growth rate
    pred = cells[-1].e_pred[i]
    print(f"slope {np.polyfit(ns, logs, 1)[0]:.5f}, predicted {pred:.5f}")


if __name__ == "__main__":
    main()
