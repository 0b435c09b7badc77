"""Strong and weak asymptotics of Hermite-Pade approximants along ray sequences.

Strong form: Q_n ~ C_n (S Phi_n)^(0) and R_n^(i) ~ C_n (S Phi_n)^(i) / w_i with
C_n fixed by C_n (S Phi_n)^(0)(z) z^{-|n|} -> 1. Logs are combined before
exponentiating so that kappa and the sheet phases cancel exactly:

    log[C_n (S Phi)^(0)(z)] = |n| sum_j LI_j(z) + log S^(0)(z) - log S^(0)(inf)

with LI_j(z) = int Log(z - x) d omega_j. Weak form: (1/|n|) log|Q_n| -> -V^omega.
"""

from __future__ import annotations

import cmath
import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field

import mpmath as mp
import numpy as np

from . import hermite_pade as hp
from .equilibrium import EquilibriumOptions, EquilibriumSolution, RayVector, solve_vector_equilibrium
from .quadrature import PrecisionPolicy
from .surface import SheetPoint, SurfaceEvaluator, build_surface, log_phi, ratio_exponent
from .szego import BranchFunctionW, SzegoEvaluator, solve_szego, w_eval
from .weights import AngelescoSystem

log = logging.getLogger(__name__)

DEFAULT_MAX_TOTAL = 60  # |n| cap: Q, R at |n| = 60 need roughly 1-2 kbit working precision


@dataclass(frozen=True)
class RaySequence:
    c: RayVector
    indices: tuple
    drift_bound: float = 2.0

    def __post_init__(self):
        c = self.c if isinstance(self.c, RayVector) else RayVector(tuple(self.c))
        object.__setattr__(self, "c", c)
        idx = tuple(n if isinstance(n, hp.MultiIndex) else hp.MultiIndex(tuple(n)) for n in self.indices)
        object.__setattr__(self, "indices", idx)
        for n in idx:
            if n.p != len(c):
                raise ValueError(f"index {n.entries} has the wrong length for c={c.entries}")
            tot = n.total
            for ci, ni in zip(c.entries, n.entries):
                if abs(ni - ci * tot) > self.drift_bound:
                    raise ValueError(f"index {n.entries} drifts more than {self.drift_bound} from the ray {c.entries}")

    @classmethod
    def multiples(cls, k, ms, drift_bound: float = 2.0) -> "RaySequence":
        k = tuple(int(v) for v in k)
        return cls(RayVector.from_index(k), tuple(tuple(m * v for v in k) for m in ms), drift_bound)


@dataclass(frozen=True)
class StrongAsymptoticsRow:
    index: tuple
    z: complex
    q_ratio_error: float
    r_ratio_errors: tuple
    C_n: complex
    normal: bool = True
    precision_bits: int = 0
    q_phase_error: float = 0.0
    r_phase_errors: tuple = ()

    def __post_init__(self):
        vals = (self.q_ratio_error,) + tuple(self.r_ratio_errors)
        if not all(v >= 0 for v in vals):
            raise ValueError("ratio errors must be nonnegative (nan is rejected)")


@dataclass(frozen=True)
class WeakAsymptoticsRow:
    index: tuple
    z: complex
    w_err: float
    e_err: tuple
    e_measured: tuple  # (1/|n|) log|f_i - P_i/Q_n|
    e_predicted: tuple  # V^{omega_i + omega}(z) - ell_i


@dataclass
class Cell:
    """Everything computed for one (index, point) pair."""

    index: tuple
    z: complex
    normal: bool
    bits: int
    log_q: complex  # mp-accurate log Q_n(z)
    log_r: tuple  # log R_n^(i)(z)
    log_model0: complex  # log C_n (S Phi)^(0)(z)
    log_model: tuple  # log C_n (S Phi)^(i)(z) / w_i(z)
    log_C: complex
    V: float  # V^{omega_n}(z)
    e_pred: tuple
    log_s0_diff: complex  # log S^(0)(z) - log S^(0)(inf)


def _side_for(z: complex):
    return 1 if complex(z).imag == 0 else None


def normalization_constant(surf: SurfaceEvaluator, sz: SzegoEvaluator) -> complex:
    """C_n = exp(-|n| kappa - i theta_0 - log S^(0)(inf))."""
    lc = -surf.total * surf.kappa - 1j * surf.phases[0] - sz.log_S(0, math.inf)
    return cmath.exp(lc)


def log_normalization_constant(surf: SurfaceEvaluator, sz: SzegoEvaluator) -> complex:
    return -surf.total * surf.kappa - 1j * surf.phases[0] - sz.log_S(0, math.inf)


def realized_normalization(surf: SurfaceEvaluator, sz: SzegoEvaluator, radius: float, angle: float = 0.3) -> complex:
    """C_n (S Phi_n)^(0)(z) z^{-|n|} at z = radius * e^{i angle}; tends to 1."""
    z = radius * cmath.exp(1j * angle)
    val = log_normalization_constant(surf, sz) + sz.log_S(0, z) + log_phi(surf, SheetPoint(0, z)) - surf.total * cmath.log(z)
    return cmath.exp(val)


def _mp_log(v):
    return mp.log(v) if v != 0 else mp.mpc(-mp.inf)


def evaluate_cell(sys: AngelescoSystem, res: hp.HermitePadeResult, surf: SurfaceEvaluator, sz: SzegoEvaluator, z: complex, remainder_target: float = 1e-30) -> Cell:
    z = complex(z)
    N = surf.total
    sol = surf.solution
    side = _side_for(z)
    bits = max(res.eval_bits, 128)
    with mp.workprec(bits):
        if res.Q:
            log_q = _mp_log(res.q_eval(z))
            log_r = tuple(_mp_log(hp.remainder(res, sys, i, z, check=False, target=remainder_target)) for i in range(sys.p))
        else:
            log_q = mp.mpc(mp.nan)
            log_r = tuple(mp.mpc(mp.nan) for _ in range(sys.p))
        li = [d.log_integral_mp(z, side) for d in sol.densities]
        ds0 = sz.log_S_mp(0, z) - sz.log_S_mp(0, math.inf)
        model0 = N * mp.fsum(li) + ds0
        s0inf = sz.log_S_mp(0, math.inf)
        models = []
        for i in range(sys.p):
            tail = sum(surf.multi_index.entries[i + 1 :])
            wv = w_eval(BranchFunctionW(i, sol.densities[i].support), z)
            m_i = N * (-li[i] - mp.mpf(sol.ell[i])) + 1j * mp.pi * tail + sz.log_S_mp(i + 1, z) - s0inf - mp.log(mp.mpc(wv))
            models.append(m_i)
    V = float(np.real(sol.total_potential(np.array([z]))[0]))
    e_pred = tuple(ratio_exponent(surf, z, i) for i in range(sys.p))
    return Cell(
        tuple(surf.multi_index.entries), z, res.normal, res.precision_bits, log_q, log_r, model0, tuple(models),
        log_normalization_constant(surf, sz), V, e_pred, complex(ds0),
    )


def _ratio(log_num, log_den):
    d = log_num - log_den
    err = abs(mp.expm1(d))
    ph = abs(math.remainder(float(mp.im(d)), 2 * math.pi))
    return err, ph


def strong_row(cell: Cell) -> StrongAsymptoticsRow:
    q_err, q_ph = _ratio(cell.log_q, cell.log_model0)
    rs = [_ratio(lr, lm) for lr, lm in zip(cell.log_r, cell.log_model)]
    return StrongAsymptoticsRow(
        cell.index, cell.z, q_err, tuple(r[0] for r in rs), cmath.exp(cell.log_C), cell.normal, cell.bits, q_ph, tuple(r[1] for r in rs),
    )


def weak_row(cell: Cell) -> WeakAsymptoticsRow:
    N = sum(cell.index)
    w_err = abs(float(mp.re(cell.log_q)) / N + cell.V)
    meas = tuple((float(mp.re(lr)) - float(mp.re(cell.log_q))) / N for lr in cell.log_r)
    e_err = tuple(abs(m - p) for m, p in zip(meas, cell.e_pred))
    return WeakAsymptoticsRow(cell.index, cell.z, w_err, e_err, meas, cell.e_pred)


def strong_weak_gap(cell: Cell) -> float:
    """w_err minus its strong-form prediction, in units of the allowed slack.

    |w_err - |(1/N) log|C (S Phi)^(0)| + V|| <= -(1/N) log(1 - q) when q = Q_ratio_error < 1;
    returns the left side minus the right side (<= 0 when strong implies weak).
    """
    N = sum(cell.index)
    q = float(strong_row(cell).q_ratio_error)
    if not q < 1:
        return -math.inf
    w = weak_row(cell).w_err
    w_strong = abs(float(mp.re(cell.log_model0)) / N + cell.V)
    return abs(w - w_strong) - (-math.log1p(-q) / N)


@dataclass
class RayContext:
    """Shared pieces for one system and ray: equilibrium on the ray and S."""

    sys: AngelescoSystem
    sol: EquilibriumSolution
    sz: SzegoEvaluator
    eq_opts: EquilibriumOptions = field(default_factory=EquilibriumOptions)
    surfaces: dict = field(default_factory=dict)

    def surface(self, n) -> SurfaceEvaluator:
        key = tuple(n)
        if key not in self.surfaces:
            self.surfaces[key] = build_surface(self.sys.intervals, key, self.sol, self.eq_opts)
        return self.surfaces[key]


def make_context(sys: AngelescoSystem, c, eq_opts: EquilibriumOptions | None = None, modes: int = 256) -> RayContext:
    eq_opts = eq_opts or EquilibriumOptions()
    sol = solve_vector_equilibrium(sys.intervals, c, eq_opts)
    sz = solve_szego(sys, sol, modes)
    return RayContext(sys, sol, sz, eq_opts)


def evaluate_ray(ctx: RayContext, ray: RaySequence, points, policy: PrecisionPolicy | None = None) -> list:
    """Cells for every (index, point); indices that fail to solve are skipped with a log line."""
    cells = []
    for n in ray.indices:
        res = hp.solve(ctx.sys, n, policy)
        surf = ctx.surface(n.entries)
        for z in points:
            cells.append(evaluate_cell(ctx.sys, res, surf, ctx.sz, z))
    return cells


def verify_strong(sys, ray: RaySequence, points, policy: PrecisionPolicy | None = None, ctx: RayContext | None = None, cells=None) -> list:
    ctx = ctx or make_context(sys, ray.c)
    cells = cells if cells is not None else evaluate_ray(ctx, ray, points, policy)
    return [strong_row(c) for c in cells]


def verify_weak(sys, ray: RaySequence, points, policy: PrecisionPolicy | None = None, ctx: RayContext | None = None, cells=None) -> list:
    ctx = ctx or make_context(sys, ray.c)
    cells = cells if cells is not None else evaluate_ray(ctx, ray, points, policy)
    return [weak_row(c) for c in cells]


def default_probe_points(intervals, extras=(), n_circle: int = 8, per_gap: int = 4, clearance: float = 0.05) -> list:
    """Points on a circle of radius twice the system diameter plus real points in each gap."""
    lo = min(a for a, _ in intervals)
    hi = max(b for _, b in intervals)
    c = 0.5 * (lo + hi)
    rad = 2 * (hi - lo)
    pts = [complex(c + rad * cmath.exp(2j * math.pi * (k + 0.5) / n_circle)) for k in range(n_circle)]
    ivs = sorted(intervals)
    for (_, b), (a, _) in zip(ivs, ivs[1:]):
        L, R = b + clearance, a - clearance
        if R > L:
            pts.extend(complex(x) for x in np.linspace(L, R, per_gap))
    pts.extend(complex(z) for z in extras)
    return pts


def double_ratio(cell1: Cell, cell2: Cell) -> complex:
    """[Q(z1)/Q(z2)] [Phi^(0)(z2)/Phi^(0)(z1)]; tends to S^(0)(z1)/S^(0)(z2)."""
    # log Phi^(0) differences equal N (sum LI(z1) - sum LI(z2)), which is log_model0 minus the S part
    lphi1 = cell1.log_model0 - cell1.log_s0_diff
    lphi2 = cell2.log_model0 - cell2.log_s0_diff
    return complex(mp.exp(cell1.log_q - cell2.log_q - lphi1 + lphi2))


def double_ratio_limit(sz: SzegoEvaluator, z1, z2) -> complex:
    return cmath.exp(sz.log_S(0, z1) - sz.log_S(0, z2))


def double_ratio_trend(ctx: RayContext, ray: RaySequence, z1, z2, policy: PrecisionPolicy | None = None, cells=None) -> dict:
    """Double ratios along the ray, their successive differences and the S-based limit."""
    if cells is None:
        cells = evaluate_ray(ctx, ray, [z1, z2], policy)
    by = {}
    for c in cells:
        by.setdefault(c.index, {})[c.z] = c
    vals = [double_ratio(by[n.entries][complex(z1)], by[n.entries][complex(z2)]) for n in ray.indices]
    diffs = [abs(b - a) for a, b in zip(vals, vals[1:])]
    lim = double_ratio_limit(ctx.sz, z1, z2)
    return {"values": vals, "differences": diffs, "limit": lim, "final_error": abs(vals[-1] - lim) if vals else math.nan}


def fit_inverse_power(totals, errs) -> tuple:
    """Fit err = C |n|^(-e); returns (C, e)."""
    x = np.log(np.asarray(totals, dtype=float))
    y = np.log(np.asarray(errs, dtype=float))
    slope, icpt = np.polyfit(x, y, 1)
    return float(math.exp(icpt)), float(-slope)


# ---------------------------------------------------------------------------
# tables


def fmt(v) -> str:
    """Fixed 30-significant-digit scientific format, locale independent."""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, int):
        return str(v)
    x = mp.mpf(v) if not isinstance(v, mp.mpf) else v
    if mp.isnan(x):
        return "nan"
    if mp.isinf(x):
        return "inf" if x > 0 else "-inf"
    if x == 0:
        return "0.0"
    with mp.workdps(40):
        out = mp.nstr(x, 30, strip_zeros=False, min_fixed=1, max_fixed=0)
    # mpmath drops the exponent for numbers in [1, 10)
    return out if "e" in out else out + "e+0"


def csv_columns(p: int) -> list:
    cols = [f"n_{i + 1}" for i in range(p)] + ["n_total", "re_z", "im_z", "q_ratio_err"]
    cols += [f"r{i + 1}_ratio_err" for i in range(p)] + ["w_err"] + [f"e_err_{i + 1}" for i in range(p)]
    return cols + ["normal_flag", "precision_bits"]


def table_rows(cells) -> list:
    rows = []
    for c in cells:
        s, w = strong_row(c), weak_row(c)
        row = list(c.index) + [sum(c.index), fmt(c.z.real), fmt(c.z.imag), fmt(s.q_ratio_error)]
        row += [fmt(e) for e in s.r_ratio_errors] + [fmt(w.w_err)] + [fmt(e) for e in w.e_err]
        row += [fmt(bool(c.normal)), c.bits]
        rows.append(row)
    return rows


def to_csv(cells, p: int) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(csv_columns(p))
    for r in table_rows(cells):
        wr.writerow(r)
    return buf.getvalue()


def to_json(cells, p: int) -> str:
    cols = csv_columns(p)
    return json.dumps([dict(zip(cols, r)) for r in table_rows(cells)], indent=1, sort_keys=True) + "\n"


def run_experiment(config, cache=None, out_dir=None) -> dict:
    """equilibrium -> szego -> surfaces -> hermite-pade -> tables.

    config needs: system (AngelescoSystem), c, indices, points, policy,
    eq_opts, modes. cache, when given, offers get_equilibrium/put_equilibrium
    and get_szego/put_szego keyed by content; out_dir receives asymptotics.csv
    and asymptotics.json (written through cache.atomic_write if available).
    Stage failures are re-raised as StageError with the stage label.
    """
    sys = config.system
    eq_opts = config.eq_opts
    try:
        sol = cache.get_equilibrium(sys.intervals, config.c, eq_opts) if cache else None
        if sol is None:
            sol = solve_vector_equilibrium(sys.intervals, config.c, eq_opts)
            if cache:
                cache.put_equilibrium(sys.intervals, config.c, eq_opts, sol)
    except Exception as exc:
        raise StageError("equilibrium", exc) from exc
    try:
        sz = cache.get_szego(sys, sol, config.modes) if cache else None
        if sz is None:
            sz = solve_szego(sys, sol, config.modes)
            if cache:
                cache.put_szego(sys, sol, config.modes, sz)
    except Exception as exc:
        raise StageError("szego", exc) from exc
    ctx = RayContext(sys, sol, sz, eq_opts)
    ray = RaySequence(RayVector(tuple(sol.c)), tuple(config.indices), getattr(config, "drift_bound", 2.0))
    cells = []
    for n in ray.indices:
        try:
            surf = ctx.surface(n.entries)
            if surf.solution is not sol:
                log.info("index %s is off the ray: equilibrium recomputed for %s", n.entries, tuple(round(v, 12) for v in surf.solution.c))
        except Exception as exc:
            raise StageError("equilibrium", exc) from exc
        try:
            res = hp.solve(sys, n, config.policy)
        except Exception as exc:
            raise StageError("hp", exc) from exc
        try:
            cells.extend(evaluate_cell(sys, res, surf, sz, z) for z in config.points)
        except Exception as exc:
            raise StageError("harness", exc) from exc
    return {"cells": cells, "csv": to_csv(cells, sys.p), "json": to_json(cells, sys.p), "solution": sol, "szego": sz, "context": ctx}


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage} stage failed: {cause}")
        self.stage = stage
        self.cause = cause
