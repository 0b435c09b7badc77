"""Median strong-asymptotics errors along a ray of multiples, as a table.

    python scripts/strong_trend.py --k 1 1 --m 5 21
"""

from __future__ import annotations

import argparse
from collections import defaultdict

import numpy as np

from angelesco.asymptotics import RaySequence, default_probe_points, double_ratio_trend, evaluate_ray, make_context, strong_row, weak_row
from angelesco.quadrature import PrecisionPolicy
from angelesco.weights import AngelescoSystem, WeightSpec


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--intervals", type=float, nargs="+", default=[-1, -0.25, 0.25, 1])
    ap.add_argument("--k", type=int, nargs="+", default=[1, 1])
    ap.add_argument("--m", type=int, nargs=2, default=[5, 21])
    ap.add_argument("--start-bits", type=int, default=256)
    args = ap.parse_args(argv)
    ivs = list(zip(args.intervals[::2], args.intervals[1::2]))
    sys = AngelescoSystem(tuple(WeightSpec(iv) for iv in ivs))
    ray = RaySequence.multiples(args.k, range(*args.m))
    ctx = make_context(sys, ray.c)
    pts = default_probe_points(ivs)
    cells = evaluate_ray(ctx, ray, pts, PrecisionPolicy(args.start_bits, 4096))
    by = defaultdict(list)
    for c in cells:
        by[c.index].append(c)
    print("index       |n|  median_q     median_r (per component)        median_w     bits")
    for n in ray.indices:
        cs = by[n.entries]
        s = [strong_row(c) for c in cs]
        q = np.median([float(r.q_ratio_error) for r in s])
        r = [np.median([float(x.r_ratio_errors[i]) for x in s]) for i in range(sys.p)]
        w = np.median([weak_row(c).w_err for c in cs])
        print(f"{str(n.entries):11s} {n.total:4d}  {q:.4e}   {'  '.join(f'{v:.4e}' for v in r)}   {w:.4e}   {cs[0].bits}")
    tr = double_ratio_trend(ctx, ray, pts[0], pts[min(3, len(pts) - 1)], cells=cells)
    print("double-ratio steps:", " ".join(f"{d:.2e}" for d in tr["differences"]))
    print(f"double-ratio limit error: {tr['final_error']:.3e}")


if __name__ == "__main__":
    main()
