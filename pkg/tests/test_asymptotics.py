from __future__ import annotations

import cmath
import logging
import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, strategies as st

import angelesco.asymptotics as asy
from angelesco.asymptotics import (
    RaySequence,
    StageError,
    StrongAsymptoticsRow,
    csv_columns,
    default_probe_points,
    double_ratio_trend,
    evaluate_ray,
    fit_inverse_power,
    fmt,
    make_context,
    normalization_constant,
    realized_normalization,
    run_experiment,
    strong_row,
    strong_weak_gap,
    to_csv,
    verify_strong,
    verify_weak,
    weak_row,
)
from angelesco.equilibrium import EquilibriumOptions, RayVector
from angelesco.quadrature import PrecisionPolicy
from angelesco.weights import AngelescoSystem, WeightSpec

from conftest import SYMMETRIC, chebyshev_weight

PHI2 = 2 + math.sqrt(3)


@pytest.fixture(scope="module")
def cheb_ctx(cheb_system):
    return make_context(cheb_system, (1.0,))


@pytest.fixture(scope="module")
def cheb_cells(cheb_ctx):
    ray = RaySequence.multiples((1,), range(1, 9))
    return evaluate_ray(cheb_ctx, ray, [2.0, 0.5 + 1j])


@pytest.fixture(scope="module")
def sym_ctx(sym_system):
    return make_context(sym_system, (0.5, 0.5))


@pytest.fixture(scope="module")
def sym_cells(sym_ctx):
    ray = RaySequence.multiples((1, 1), [3, 6])
    return evaluate_ray(sym_ctx, ray, default_probe_points(SYMMETRIC))


def _config(sys, c, indices, points, **kw):
    base = dict(system=sys, c=c, indices=tuple(indices), points=tuple(points), policy=PrecisionPolicy(), eq_opts=EquilibriumOptions(), modes=256, drift_bound=2.0)
    base.update(kw)
    return SimpleNamespace(**base)


# --- ray sequences -----------------------------------------------------------


def test_ray_multiples_lie_on_ray():
    ray = RaySequence.multiples((2, 1), range(1, 4))
    assert [n.entries for n in ray.indices] == [(2, 1), (4, 2), (6, 3)]
    assert ray.c.entries == pytest.approx((2 / 3, 1 / 3))


def test_ray_accepts_bounded_drift():
    ray = RaySequence(RayVector((0.5, 0.5)), [(m + 1, m) for m in range(1, 6)])
    assert len(ray.indices) == 5


@pytest.mark.parametrize("idx", [(10, 4), (1, 7)])
def test_ray_rejects_large_drift(idx):
    with pytest.raises(ValueError, match="drifts"):
        RaySequence(RayVector((0.5, 0.5)), [idx])


def test_ray_rejects_wrong_length():
    with pytest.raises(ValueError, match="length"):
        RaySequence(RayVector((0.5, 0.5)), [(3,)])


def test_row_rejects_nan_and_negative():
    with pytest.raises(ValueError):
        StrongAsymptoticsRow((1,), 2j, math.nan, (0.0,), 1 + 0j)
    with pytest.raises(ValueError):
        StrongAsymptoticsRow((1,), 2j, 0.1, (-1e-3,), 1 + 0j)


# --- normalization -----------------------------------------------------------


@pytest.mark.parametrize("n", [1, 5, 12])
def test_chebyshev_normalization_modulus(cheb_ctx, n):
    surf = cheb_ctx.surface((n,))
    s_inf = abs(cmath.exp(cheb_ctx.sz.log_S(0, math.inf)))
    assert abs(normalization_constant(surf, cheb_ctx.sz)) == pytest.approx(2.0**-n / s_inf, rel=1e-12)


@pytest.mark.parametrize("which,n", [("cheb", (5,)), ("sym", (5, 5)), ("sym", (10, 10))])
def test_normalization_realized_far_out(which, n, cheb_ctx, sym_ctx):
    ctx = cheb_ctx if which == "cheb" else sym_ctx
    surf = ctx.surface(n)
    assert abs(realized_normalization(surf, ctx.sz, 1e4) - 1) < 1e-6
    # the tail decays like 1/R^2, so doubling from 1e5 must move the estimate by < 1e-8
    a = realized_normalization(surf, ctx.sz, 1e5)
    b = realized_normalization(surf, ctx.sz, 2e5)
    assert abs(1 / a - 1 / b) < 1e-8


# --- strong and weak rows ----------------------------------------------------


def test_chebyshev_strong_exactness(cheb_cells):
    for c in cheb_cells:
        if c.z != 2:
            continue
        n = c.index[0]
        s = strong_row(c)
        assert s.q_ratio_error == pytest.approx(PHI2 ** (-2 * n), rel=1e-8)
        # R_n = C_n (S Phi)^(1)/w exactly for the Chebyshev weight
        assert float(s.r_ratio_errors[0]) < 1e-12
        assert s.q_phase_error < 1e-12


def test_chebyshev_weak_closed_form(cheb_cells):
    errs = []
    for c in cheb_cells:
        if c.z != 2:
            continue
        n = c.index[0]
        w = weak_row(c)
        assert w.w_err == pytest.approx(math.log1p(PHI2 ** (-2 * n)) / n, rel=1e-6)
        errs.append(w.w_err)
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_verify_wrappers_match_cells(cheb_system, cheb_ctx, cheb_cells):
    ray = RaySequence.multiples((1,), range(1, 9))
    strong = verify_strong(cheb_system, ray, [2.0, 0.5 + 1j], ctx=cheb_ctx, cells=cheb_cells)
    weak = verify_weak(cheb_system, ray, [2.0, 0.5 + 1j], ctx=cheb_ctx, cells=cheb_cells)
    assert len(strong) == len(weak) == 16
    assert strong[0].index == (1,) and weak[-1].index == (8,)


def test_strong_implies_weak(cheb_cells, sym_cells):
    for c in list(cheb_cells) + list(sym_cells):
        assert strong_weak_gap(c) <= 1e-10


def test_symmetric_errors_shrink(sym_cells):
    med = {}
    for c in sym_cells:
        med.setdefault(c.index, []).append(strong_row(c).q_ratio_error)
    assert np.median(med[(6, 6)]) < np.median(med[(3, 3)])


def test_exponent_signs_agree_with_prediction(sym_cells):
    for c in sym_cells:
        w = weak_row(c)
        for m, p in zip(w.e_measured, w.e_predicted):
            if abs(p) > 0.05:
                assert math.copysign(1, m) == math.copysign(1, p)


def test_rows_flagged_when_not_normal():
    # m0 = 0 for rho = 1 + i x - 3 x^2: n = (1) has no normal denominator
    from angelesco.weights import RegularPart

    w = WeightSpec((-1.0, 1.0), RegularPart("polynomial", (1.0, 1j, -3.0)))
    sys = AngelescoSystem((w,))
    ctx = make_context(sys, (1.0,))
    cells = evaluate_ray(ctx, RaySequence.multiples((1,), [1]), [2.0], PrecisionPolicy(max_bits=512))
    assert len(cells) == 1 and not cells[0].normal


def test_double_ratio_limit(sym_ctx):
    ray = RaySequence.multiples((1, 1), [4, 8, 12])
    tr = double_ratio_trend(sym_ctx, ray, 2.0 + 0.5j, -0.5 + 2j)
    d = tr["differences"]
    assert d[1] < d[0]
    assert tr["final_error"] < 5e-2


# --- fits and formatting -----------------------------------------------------


def test_fit_inverse_power_recovers_law():
    ns = np.arange(5, 40, 5)
    C, e = fit_inverse_power(ns, 0.3 / ns**1.5)
    assert C == pytest.approx(0.3, rel=1e-10)
    assert e == pytest.approx(1.5, rel=1e-10)


@given(st.floats(allow_nan=False, allow_infinity=False, min_value=-1e300, max_value=1e300))
def test_fmt_round_trips(x):
    s = fmt(x)
    assert float(s) == x
    assert "," not in s


@pytest.mark.parametrize("v,out", [(0.0, "0.0"), (2.0, "2.00000000000000000000000000000e+0"), (True, "1"), (7, "7"), (math.nan, "nan")])
def test_fmt_examples(v, out):
    assert fmt(v) == out


def test_csv_columns_p2():
    assert csv_columns(2) == [
        "n_1", "n_2", "n_total", "re_z", "im_z", "q_ratio_err", "r1_ratio_err", "r2_ratio_err",
        "w_err", "e_err_1", "e_err_2", "normal_flag", "precision_bits",
    ]


def test_csv_is_deterministic(cheb_cells):
    a, b = to_csv(cheb_cells, 1), to_csv(list(cheb_cells), 1)
    assert a == b
    lines = a.splitlines()
    assert lines[0].split(",") == csv_columns(1)
    assert len(lines) == 1 + len(cheb_cells)
    assert "\r" not in a


@pytest.mark.parametrize("n_circle,per_gap", [(8, 4), (4, 2)])
def test_default_probe_points_clear_of_intervals(n_circle, per_gap):
    pts = default_probe_points(SYMMETRIC, n_circle=n_circle, per_gap=per_gap)
    assert len(pts) == n_circle + per_gap
    for z in pts:
        for a, b in SYMMETRIC:
            d = abs(z - min(max(z.real, a), b))
            assert d >= 0.05 - 1e-12


# --- orchestration -----------------------------------------------------------


def test_drift_recomputes_equilibrium(sym_ctx):
    s = sym_ctx.surface((4, 3))
    assert s.solution is not sym_ctx.sol
    assert s.solution.c == pytest.approx((4 / 7, 3 / 7))
    assert sym_ctx.surface((4, 4)).solution is sym_ctx.sol


def test_run_experiment_logs_drift(sym_system, caplog):
    cfg = _config(sym_system, (0.5, 0.5), [(2, 1)], [2.0 + 1j])
    with caplog.at_level(logging.INFO, logger="angelesco.asymptotics"):
        out = run_experiment(cfg)
    assert "off the ray" in caplog.text
    assert len(out["cells"]) == 1


def test_run_experiment_empty(cheb_system):
    out = run_experiment(_config(cheb_system, (1.0,), [], [2.0]))
    assert out["cells"] == []
    assert out["csv"] == ",".join(csv_columns(1)) + "\n"


@pytest.mark.parametrize(
    "target,stage",
    [("solve_vector_equilibrium", "equilibrium"), ("solve_szego", "szego"), ("evaluate_cell", "harness")],
)
def test_stage_labels(cheb_system, monkeypatch, target, stage):
    def boom(*a, **k):
        raise RuntimeError("injected")

    monkeypatch.setattr(asy, target, boom)
    with pytest.raises(StageError) as info:
        run_experiment(_config(cheb_system, (1.0,), [(2,)], [2.0]))
    assert info.value.stage == stage


def test_stage_label_hp(cheb_system, monkeypatch):
    monkeypatch.setattr(asy.hp, "solve", lambda *a, **k: (_ for _ in ()).throw(RuntimeError("injected")))
    with pytest.raises(StageError) as info:
        run_experiment(_config(cheb_system, (1.0,), [(2,)], [2.0]))
    assert info.value.stage == "hp"


def test_chebyshev_on_shifted_interval():
    sys = AngelescoSystem((chebyshev_weight((1.0, 3.0)),))
    ctx = make_context(sys, (1.0,))
    cells = evaluate_ray(ctx, RaySequence.multiples((1,), [4]), [4.0])
    # z = 4 maps to u = 2 on [-1, 1]
    assert strong_row(cells[0]).q_ratio_error == pytest.approx(PHI2**-8, rel=1e-8)
