"""Sheet-wise evaluation of h and log Phi on the (p+1)-sheeted surface.

Sheet 0 is glued to sheet i along the support of the i-th equilibrium
component. With omega = sum_i omega_i and N = |n|,

    log Phi^(0)(z) = N (int Log(z - x) d omega + kappa) + i theta_0
    log Phi^(i)(z) = N (-int Log(z - x) d omega_i - ell_i + kappa) + i theta_i

and h = (1/N) d log Phi / dz. The phases theta_k are fixed by gluing
(theta_i = theta_0 + pi N_{>i}, where N_{>i} = n_{i+1} + ... + n_p) and by
the product identity sum_k log Phi^(k) = 0, which gives theta_0 linear in n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .equilibrium import HARD, EquilibriumOptions, EquilibriumSolution, RayVector, solve_vector_equilibrium
from .hermite_pade import MultiIndex
from .weights import BranchError


class PhaseError(RuntimeError):
    """Product normalization of Phi violated: a branch bookkeeping bug."""


class GapError(RuntimeError):
    """h^(0) has no zero on a gap although both end values are finite."""


@dataclass(frozen=True)
class SheetPoint:
    sheet: int
    z: complex

    def __post_init__(self):
        if self.sheet < 0:
            raise ValueError("sheet index must be nonnegative")
        object.__setattr__(self, "z", complex(self.z))


@dataclass(frozen=True, eq=False)
class SurfaceEvaluator:
    solution: EquilibriumSolution
    multi_index: MultiIndex
    kappa: float
    gap_zeros: tuple
    phases: tuple  # theta_0, ..., theta_p

    @property
    def p(self) -> int:
        return self.solution.p

    @property
    def total(self) -> int:
        return self.multi_index.total

    def to_dict(self) -> dict:
        return {"multi_index": list(self.multi_index.entries), "kappa": self.kappa, "gap_zeros": list(self.gap_zeros)}


def surface_phases(n) -> tuple:
    n = list(n)
    p = len(n)
    tail = [sum(n[i + 1 :]) for i in range(p)]
    theta0 = -math.pi * sum(tail) / (p + 1)
    return (theta0,) + tuple(theta0 + math.pi * t for t in tail)


def _on_ray(sol: EquilibriumSolution, n: MultiIndex) -> bool:
    tot = n.total
    return all(abs(ci * tot - ni) < 1e-9 * tot for ci, ni in zip(sol.c, n.entries))


def equilibrium_for(intervals, n, sol: EquilibriumSolution | None = None, opts: EquilibriumOptions | None = None):
    """Reuse sol when n lies exactly on its ray, else solve for n/|n|."""
    n = n if isinstance(n, MultiIndex) else MultiIndex(tuple(n))
    if sol is not None and _on_ray(sol, n):
        return sol
    return solve_vector_equilibrium(intervals, RayVector.from_index(n.entries), opts)


def build_surface(intervals, n, sol: EquilibriumSolution | None = None, opts: EquilibriumOptions | None = None, tol: float = 1e-10) -> SurfaceEvaluator:
    n = n if isinstance(n, MultiIndex) else MultiIndex(tuple(n))
    sol = equilibrium_for(intervals, n, sol, opts)
    if sol.p != n.p:
        raise ValueError("multi-index length differs from the number of components")
    kappa = sum(sol.ell) / (sol.p + 1)
    ev = SurfaceEvaluator(sol, n, kappa, (), surface_phases(n.entries))
    zref = max(b for _, b in sol.supports) + 1.0
    tot = sum(log_phi(ev, SheetPoint(k, zref)) for k in range(sol.p + 1))
    if abs(tot) > tol * max(1.0, n.total):
        raise PhaseError(f"product identity violated at z={zref}: sum log Phi = {tot}")
    zeros = tuple(gap_zeros(ev)) if sol.p >= 2 else ()
    return SurfaceEvaluator(sol, n, kappa, zeros, ev.phases)


def _check_sheet(ev: SurfaceEvaluator, pt: SheetPoint):
    if pt.sheet > ev.p:
        raise ValueError(f"sheet {pt.sheet} out of range for p={ev.p}")


def h_eval(ev: SurfaceEvaluator, pt: SheetPoint, side: int | None = None) -> complex:
    """Sheet 0: int d omega/(z - x); sheet i: int d omega_i/(x - z)."""
    _check_sheet(ev, pt)
    dens = ev.solution.densities
    z = np.array([pt.z])
    if pt.sheet == 0:
        return complex(sum(d.cauchy(z, side)[0] for d in dens))
    return complex(-dens[pt.sheet - 1].cauchy(z, side)[0])


def log_phi(ev: SurfaceEvaluator, pt: SheetPoint, side: int | None = None) -> complex:
    """log Phi_n at a sheet point (principal logarithms inside the integrals)."""
    _check_sheet(ev, pt)
    sol = ev.solution
    N = ev.total
    z = np.array([pt.z])
    if pt.sheet == 0:
        val = sum(d.log_integral(z, side)[0] for d in sol.densities) + ev.kappa
    else:
        i = pt.sheet - 1
        val = -sol.densities[i].log_integral(z, side)[0] - sol.ell[i] + ev.kappa
    return complex(N * val + 1j * ev.phases[pt.sheet])


def ratio_exponent(ev: SurfaceEvaluator, z: complex, i: int) -> float:
    """(1/|n|) log|Phi^(i)/Phi^(0)| = V^{omega_i + omega}(z) - ell_i (component i, 0-based)."""
    # real parts do not depend on the side, which is only needed for the principal logs
    side = 1 if complex(z).imag == 0 else None
    lo = log_phi(ev, SheetPoint(i + 1, z), side)
    l0 = log_phi(ev, SheetPoint(0, z), side)
    return (lo.real - l0.real) / ev.total


def recover_density(ev: SurfaceEvaluator, i: int, probe_xs) -> np.ndarray:
    """(h_-^(0) - h_+^(0)) / (2 pi i) at points inside support i."""
    xs = np.asarray(probe_xs, dtype=float)
    lo, hi = ev.solution.densities[i].support
    if np.any((xs <= lo) | (xs >= hi)):
        raise ValueError("probe points must lie strictly inside the support")
    dens = ev.solution.densities
    z = xs + 0j
    hp = sum(d.cauchy(z, 1) for d in dens)
    hm = sum(d.cauchy(z, -1) for d in dens)
    return ((hm - hp) / (2j * math.pi)).real


def _h0_real(ev, x) -> float:
    return h_eval(ev, SheetPoint(0, complex(x))).real


def _neville_zero(ts, vals) -> float:
    # polynomial extrapolation to t = 0
    p = list(vals)
    n = len(ts)
    for m in range(1, n):
        for k in range(n - m):
            p[k] = (ts[k + m] * p[k] - ts[k] * p[k + 1]) / (ts[k + m] - ts[k])
    return p[0]


def edge_limit(ev: SurfaceEvaluator, x0: float, direction: int) -> float:
    """Limit of h^(0) approaching the support end x0 from the gap (direction +1 = from the right).

    Returns +-inf at hard edges. At soft edges h^(0) is analytic in
    sqrt(distance), so extrapolate in t = sqrt(distance).
    """
    for d in ev.solution.densities:
        a, b = d.support
        if x0 == b and direction > 0 and d.edge_class[1] == HARD:
            return math.inf
        if x0 == a and direction < 0 and d.edge_class[0] == HARD:
            return -math.inf
    scale = max(b - a for a, b in ev.solution.supports)
    ts = [math.sqrt(1e-4 * scale) * 2.0**-k for k in range(6)]
    vals = [_h0_real(ev, x0 + direction * t * t) for t in ts]
    return _neville_zero(ts, vals)


def gap_zeros(ev: SurfaceEvaluator, tol: float = 1e-10) -> list:
    """The zero of h^(0) on each gap between consecutive supports."""
    sups = ev.solution.supports
    out = []
    for i in range(len(sups) - 1):
        L, R = sups[i][1], sups[i + 1][0]
        hL, hR = edge_limit(ev, L, +1), edge_limit(ev, R, -1)
        scale = 1.0 / (R - L)
        if math.isfinite(hL) and hL <= tol * scale:
            out.append(L)
            continue
        if math.isfinite(hR) and hR >= -tol * scale:
            out.append(R)
            continue
        if math.isfinite(hL) and math.isfinite(hR) and not hL > 0 > hR:
            raise GapError(f"no sign change of h^(0) on gap ({L}, {R})")
        lo, hi = L, R
        if not math.isfinite(hL):
            lo = L + 1e-12 * (R - L)
        if not math.isfinite(hR):
            hi = R - 1e-12 * (R - L)
        f = lambda x: _h0_real(ev, x)
        if not f(lo) > 0 > f(hi):
            raise GapError(f"h^(0) does not change sign on gap ({L}, {R})")
        out.append(brentq(f, lo, hi, xtol=1e-15, rtol=1e-15))
    return out


def sheet_sum_h(ev: SurfaceEvaluator, z: complex) -> complex:
    return sum(h_eval(ev, SheetPoint(k, z)) for k in range(ev.p + 1))


def sheet_sum_log_phi(ev: SurfaceEvaluator, z: complex) -> complex:
    """sum_k log Phi^(k)(z), reduced mod 2 pi i to (-pi, pi]."""
    tot = sum(log_phi(ev, SheetPoint(k, z)) for k in range(ev.p + 1))
    im = math.remainder(tot.imag, 2 * math.pi)
    return complex(tot.real, im)


def boundary_mismatch(ev: SurfaceEvaluator, i: int, xs) -> float:
    """max | |Phi^(0)_+-| - |Phi^(i)_-+| | in log scale on support i (traces swap across the cut)."""
    worst = 0.0
    for x in np.asarray(xs, dtype=float):
        for side in (1, -1):
            l0 = log_phi(ev, SheetPoint(0, x), side)
            li = log_phi(ev, SheetPoint(i + 1, x), -side)
            worst = max(worst, abs(l0.real - li.real) / ev.total)
    return worst


__all__ = [
    "BranchError",
    "GapError",
    "PhaseError",
    "SheetPoint",
    "SurfaceEvaluator",
    "boundary_mismatch",
    "build_surface",
    "edge_limit",
    "equilibrium_for",
    "gap_zeros",
    "h_eval",
    "log_phi",
    "ratio_exponent",
    "recover_density",
    "sheet_sum_h",
    "sheet_sum_log_phi",
    "surface_phases",
]
