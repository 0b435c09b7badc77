from __future__ import annotations

import cmath
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from angelesco.equilibrium import solve_vector_equilibrium
from angelesco.szego import (
    BranchFunctionW,
    SzegoError,
    SzegoEvaluator,
    corner_exponent,
    fit_exponent,
    local_singularity_model,
    mean_value_defect,
    middle_exponent,
    p1_oracle,
    solve_szego,
    w_eval,
)
from angelesco.weights import AngelescoSystem, RegularPart, SingularPoint, WeightSpec

from conftest import PUSHED, SYMMETRIC, chebyshev_weight

P1 = [(-1.0, 1.0)]


def _p1(w):
    sys = AngelescoSystem((w,))
    sol = solve_vector_equilibrium(P1, (1.0,))
    return sys, solve_szego(sys, sol)


def _fh(alpha_a=0.0, alpha_m=0.0, beta=1.0, alpha_b=0.0, x0=0.2, reg=RegularPart()):
    return WeightSpec((-1.0, 1.0), reg, (SingularPoint(-1.0, alpha_a), SingularPoint(x0, alpha_m, beta), SingularPoint(1.0, alpha_b)))


def test_branch_function():
    w = BranchFunctionW(0, (-1.0, 1.0))
    assert w_eval(w, 2.0) == pytest.approx(math.sqrt(3))
    assert w_eval(w, 0.0, side=1) == pytest.approx(1j)
    assert w_eval(w, 0.0, side=-1) == pytest.approx(-1j)
    assert w_eval(w, 1e6 * cmath.exp(2j)) / (1e6 * cmath.exp(2j)) == pytest.approx(1.0, abs=1e-6)


OFF_CUT = [2.0, 0.3 + 0.4j, -0.7 - 0.2j, 5j, -1.5]


@pytest.mark.parametrize(
    "weight",
    [
        chebyshev_weight(),
        WeightSpec((-1.0, 1.0)),
        _fh(-0.3, 0.4, cmath.exp(0.8j), 0.6, reg=RegularPart("exp-polynomial", (0.2, -0.5j, 0.3))),
        _fh(0.5, -0.2, 2.5, -0.5, x0=-0.4, reg=RegularPart("polynomial", (2.0, 0.5j))),
    ],
    ids=["chebyshev", "legendre", "fh-complex", "fh-real-jump"],
)
def test_matches_single_interval_oracle(weight):
    sys, ev = _p1(weight)
    orc = p1_oracle(weight, (-1.0, 1.0))
    for z in OFF_CUT:
        for sheet in (0, 1):
            assert abs(ev.log_S(sheet, z) - orc.log_S(sheet, z)) < 1e-8
    assert abs(ev.log_S(0, math.inf) - orc.log_S(0, math.inf)) < 1e-8


def test_oracle_jump_relation_constant_weight():
    w = WeightSpec((-1.0, 1.0))
    orc = p1_oracle(w, (-1.0, 1.0))
    for x in np.linspace(-0.9, 0.9, 7):
        # S1_+ = S0_- rho w_+, with rho = 1
        lhs = orc.log_S(1, x, side=1) - orc.log_S(0, x, side=-1)
        rhs = cmath.log(w_eval(BranchFunctionW(0, (-1.0, 1.0)), x, side=1))
        d = lhs - rhs
        assert abs(complex(d.real, math.remainder(d.imag, 2 * math.pi))) < 1e-10


def test_oracle_normalization_and_product():
    orc = p1_oracle(chebyshev_weight(), (-1.0, 1.0))
    s_inf = cmath.exp(orc.log_S(0, math.inf))
    assert math.isfinite(abs(s_inf)) and abs(s_inf) > 0
    for z in [2.0, 1j, -3 + 0.1j, 0.5 - 0.5j, 10.0, -0.2 + 2j, 1.2 + 0.01j, -1.01]:
        tot = orc.log_S(0, z) + orc.log_S(1, z)
        assert abs(cmath.exp(tot) - 1) < 1e-12


SYSTEMS = {
    "symmetric": (AngelescoSystem(tuple(WeightSpec(iv) for iv in SYMMETRIC)), SYMMETRIC, (0.5, 0.5)),
    "pushed": (AngelescoSystem(tuple(WeightSpec(iv) for iv in PUSHED)), PUSHED, (0.7, 0.3)),
    "fisher-hartwig": (
        AngelescoSystem(
            (
                WeightSpec(SYMMETRIC[0], RegularPart("exp-polynomial", (0.0, 0.3j)), (SingularPoint(-1.0, -0.5), SingularPoint(-0.6, 0.3, cmath.exp(1j)), SingularPoint(-0.25, 0.2))),
                WeightSpec(SYMMETRIC[1], RegularPart("polynomial", (1.0, 0.5)), (SingularPoint(0.25, 0.7), SingularPoint(0.5, -0.4, 3.0), SingularPoint(1.0, -0.3))),
            )
        ),
        SYMMETRIC,
        (0.6, 0.4),
    ),
}


@pytest.fixture(scope="module")
def solved():
    out = {}
    for name, (sys, ivs, c) in SYSTEMS.items():
        sol = solve_vector_equilibrium(ivs, c)
        out[name] = (sys, sol, solve_szego(sys, sol))
    return out


@pytest.mark.parametrize("name", list(SYSTEMS))
def test_certification(solved, name):
    _, _, ev = solved[name]
    assert ev.report["jump_residual"] < 1e-8
    assert ev.report["product_residual"] < 1e-10


@pytest.mark.parametrize("name", list(SYSTEMS))
def test_mean_value_property(solved, name):
    _, _, ev = solved[name]
    for z0 in (0.0 + 0.5j, 2.5 - 0.3j):
        for sheet in range(3):
            assert mean_value_defect(ev, z0, 0.2, sheet=sheet) < 1e-8


@pytest.mark.parametrize("name", list(SYSTEMS))
def test_resolution_gate(solved, name):
    sys, sol, ev = solved[name]
    coarse = solve_szego(sys, sol, N=128)
    for z in (1.5 + 0.5j, -0.1 + 0.05j, 3.5):
        for sheet in range(3):
            assert abs(coarse.log_S(sheet, z) - ev.log_S(sheet, z)) < 1e-8


def test_failed_certification_raises(solved):
    sys, sol, _ = solved["symmetric"]
    with pytest.raises(SzegoError):
        solve_szego(sys, sol, N=16, tol=1e-300)


def test_serialization_round_trip(solved):
    _, _, ev = solved["fisher-hartwig"]
    back = SzegoEvaluator.from_dict(json.loads(json.dumps(ev.to_dict())))
    for z in (2.0, 0.1 + 0.3j):
        assert back.log_S(0, z) == ev.log_S(0, z)


def test_sheet_zero_on_real_axis_needs_side(solved):
    _, _, ev = solved["symmetric"]
    with pytest.raises(Exception):
        ev.log_S(0, 0.5)


@pytest.mark.parametrize("alpha", [-0.3, 0.0, 0.7])
@pytest.mark.parametrize("end", [-1.0, 1.0])
def test_hard_edge_exponent(alpha, end):
    w = _fh(alpha if end < 0 else 0.0, 0.0, 1.0, alpha if end > 0 else 0.0)
    _, ev = _p1(w)
    slope = fit_exponent(ev, end, cmath.exp(1j * (2.0 if end > 0 else 1.0)))
    assert slope == pytest.approx(corner_exponent(alpha), rel=0.02)


def test_soft_edge_exponent(solved):
    _, sol, ev = solved["pushed"]
    a2 = sol.supports[1][0]
    slope = fit_exponent(ev, a2, cmath.exp(2.5j))
    assert slope == pytest.approx(corner_exponent(0.0), rel=0.02)


@pytest.mark.parametrize("alpha,theta", [(0.0, 1.0), (0.4, -2.0), (-0.3, 0.5), (0.6, 0.0)])
@pytest.mark.parametrize("half_plane", [1, -1])
def test_interior_exponent(alpha, theta, half_plane):
    beta = cmath.exp(1j * theta) * 1.7
    _, ev = _p1(_fh(0.0, alpha, beta, 0.0, x0=0.2))
    slope = fit_exponent(ev, 0.2, cmath.exp(1j * half_plane * 1.2))
    want = middle_exponent(alpha, beta, half_plane)
    assert slope == pytest.approx(want, rel=0.02, abs=1e-3)


def test_local_models():
    z = 0.3 + 0.2j
    lg = cmath.log(z - 0.1)
    assert local_singularity_model(1, {"x0": 0.1, "alpha": 0.6}, z) == pytest.approx(0.3 * lg)
    assert local_singularity_model(1, {"x0": 0.1, "alpha": 0.6}, z, sheet=1) == pytest.approx(-0.3 * lg)
    beta = 2.0 * cmath.exp(0.4j)
    assert local_singularity_model(2, {"x0": 0.1, "beta": beta}, z) == pytest.approx(-cmath.log(beta) / (2j * math.pi) * lg)
    assert local_singularity_model(2, {"x0": 0.1, "beta": 1.0}, z) == 0
    with pytest.raises(ValueError):
        local_singularity_model(3, {"x0": 0.0}, z)


@settings(max_examples=8)
@given(
    st.floats(-0.8, 1.5),
    st.floats(-0.8, 1.5),
    st.floats(-0.8, 1.5),
    st.floats(-3.0, 3.0),
    st.floats(0.2, 5.0),
    st.floats(0.2, 0.8),
)
def test_certification_on_random_weights(a0, a1, a2, theta, mod, c1):
    w1 = WeightSpec(SYMMETRIC[0], singular=(SingularPoint(-1.0, a0), SingularPoint(-0.5, a1, mod * cmath.exp(1j * theta)), SingularPoint(-0.25, 0.0)))
    w2 = WeightSpec(SYMMETRIC[1], RegularPart("exp-polynomial", (0.0, 1j * theta / 3)), (SingularPoint(0.25, 0.0), SingularPoint(1.0, a2)))
    sys = AngelescoSystem((w1, w2))
    ev = solve_szego(sys, solve_vector_equilibrium(SYMMETRIC, (c1, 1 - c1)))
    assert ev.report["jump_residual"] < 1e-8
    assert ev.report["product_residual"] < 1e-10
