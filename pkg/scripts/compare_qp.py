"""Equilibrium solver against the discretised energy minimiser on one geometry."""

from __future__ import annotations

import argparse
import time

import numpy as np

from angelesco.equilibrium import qp_oracle, solve_vector_equilibrium


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--intervals", type=float, nargs="+", default=[-1, -0.25, 0.25, 1])
    ap.add_argument("--c", type=float, nargs="+", default=[0.7, 0.3])
    ap.add_argument("--grid", type=int, default=400)
    args = ap.parse_args(argv)
    ivs = list(zip(args.intervals[::2], args.intervals[1::2]))
    t0 = time.perf_counter()
    sol = solve_vector_equilibrium(ivs, args.c)
    t1 = time.perf_counter()
    dm = qp_oracle(ivs, args.c, args.grid)
    t2 = time.perf_counter()
    for k, ((lo, hi), d, h) in enumerate(zip(dm.supports(), sol.densities, dm.widths)):
        a, b = d.support
        print(f"component {k + 1}: solver [{a:.6f}, {b:.6f}]  grid [{lo:.6f}, {hi:.6f}]  offset {max(abs(lo - a), abs(hi - b)) / h:.2f} cells")
    X, Y = np.meshgrid(np.linspace(-1.6, 1.6, 33), np.linspace(-1.0, 1.0, 21))
    Z = (X + 1j * Y).ravel()
    dist = np.min([np.abs(Z - np.clip(Z.real, a, b)) for a, b in ivs], axis=0)
    Z = Z[dist >= 0.1]
    print(f"potential sup difference {np.max(np.abs(dm.potential(Z) - sol.total_potential(Z))):.3e} on {Z.size} points")
    print(f"solver {t1 - t0:.2f}s, grid minimiser {t2 - t1:.2f}s")


if __name__ == "__main__":
    main()
