from __future__ import annotations

import cmath
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from angelesco.equilibrium import divergence_regions, solve_vector_equilibrium
from angelesco.quadrature import cheb_nodes
from angelesco.surface import (
    BranchError,
    SheetPoint,
    SurfaceEvaluator,
    boundary_mismatch,
    build_surface,
    edge_limit,
    equilibrium_for,
    h_eval,
    log_phi,
    ratio_exponent,
    recover_density,
    sheet_sum_h,
    sheet_sum_log_phi,
)

from conftest import PUSHED, SYMMETRIC

THREE = [(-2.0, -1.0), (0.0, 1.0), (1.5, 3.0)]


@pytest.fixture(scope="module")
def p1():
    return build_surface([(-1.0, 1.0)], (5,))


@pytest.fixture(scope="module")
def surfaces(sym_solution, pushed_solution):
    return {
        "symmetric": build_surface(SYMMETRIC, (3, 3), sym_solution),
        "pushed": build_surface(PUSHED, (7, 3), pushed_solution),
        "three": build_surface(THREE, (2, 5, 3)),
    }


def test_p1_closed_forms(p1):
    assert h_eval(p1, SheetPoint(0, 2.0)) == pytest.approx(1 / math.sqrt(3), rel=1e-14)
    assert log_phi(p1, SheetPoint(0, 2.0)).real == pytest.approx(5 * math.log(2 + math.sqrt(3)), rel=1e-14)
    assert ratio_exponent(p1, 2.0, 0) == pytest.approx(-2 * math.log(2 + math.sqrt(3)), rel=1e-13)


def test_p1_recovered_density(p1):
    assert recover_density(p1, 0, [0.0])[0] == pytest.approx(1 / math.pi, rel=1e-14)
    xs = np.cos(np.pi * (np.arange(33) + 0.5) / 33)
    assert np.allclose(recover_density(p1, 0, xs), p1.solution.densities[0].density(xs), rtol=1e-8)


def test_recovered_density_integrates_to_mass(sym_solution, surfaces):
    ev = surfaces["symmetric"]
    for i, d in enumerate(sym_solution.densities):
        M = 64
        t = cheb_nodes(M)
        xs = d.center + d.radius * t
        # Gauss-Chebyshev with the 1/sqrt(1-t^2) factor undone
        mass = np.pi / M * np.sum(recover_density(ev, i, xs) * np.sqrt(1 - t**2)) * d.radius
        assert mass == pytest.approx(0.5, abs=1e-12)


def test_large_z_total_mass(surfaces):
    ev = surfaces["three"]
    z = 1e7 * cmath.exp(0.4j)
    assert z * h_eval(ev, SheetPoint(0, z)) == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("name", ["symmetric", "pushed", "three"])
def test_sheet_identities_at_random_points(surfaces, name):
    ev = surfaces[name]
    rng = np.random.default_rng(7)
    lo = min(a for a, _ in ev.solution.intervals) - 1
    hi = max(b for _, b in ev.solution.intervals) + 1
    for z in rng.uniform(lo, hi, 32) + 1j * rng.uniform(-2, 2, 32):
        assert abs(sheet_sum_h(ev, z)) < 1e-10
        assert abs(sheet_sum_log_phi(ev, z)) < 1e-10


@pytest.mark.parametrize("name", ["symmetric", "pushed", "three"])
def test_traces_swap_across_cuts(surfaces, name):
    ev = surfaces[name]
    for i, d in enumerate(ev.solution.densities):
        xs = d.center + d.radius * cheb_nodes(17)
        assert boundary_mismatch(ev, i, xs) < 1e-10


def test_symmetric_gap_zero(surfaces):
    assert surfaces["symmetric"].gap_zeros == pytest.approx((0.0,), abs=1e-12)


def test_pushed_gap_zero_at_endpoint(surfaces):
    ev = surfaces["pushed"]
    a2 = ev.solution.supports[1][0]
    assert ev.gap_zeros[0] == pytest.approx(a2, abs=1e-6)
    assert math.isfinite(edge_limit(ev, a2, -1))


def test_hard_edges_blow_up_with_opposite_signs(surfaces):
    ev = surfaces["symmetric"]
    assert edge_limit(ev, -0.25, +1) == math.inf
    assert edge_limit(ev, 0.25, -1) == -math.inf


@pytest.mark.parametrize("name", ["symmetric", "pushed", "three"])
def test_h0_decreases_on_gaps(surfaces, name):
    ev = surfaces[name]
    sups = ev.solution.supports
    for (_, L), (R, _) in zip(sups, sups[1:]):
        xs = np.linspace(L, R, 67)[1:-1]
        vals = [h_eval(ev, SheetPoint(0, x)).real for x in xs]
        assert np.all(np.diff(vals) < 0)


@given(st.integers(1, 10), st.floats(0.0, 2 * math.pi), st.floats(0.1, 3.0))
def test_ray_multiples(m, angle, radius):
    k = (2, 1)
    base = build_surface(PUSHED, k)
    big = build_surface(PUSHED, (m * k[0], m * k[1]), base.solution)
    assert big.solution is base.solution
    z = complex(0.5, 0.0) + radius * cmath.exp(1j * angle)
    if abs(z.imag) < 1e-6:
        return
    for sheet in range(3):
        diff = log_phi(big, SheetPoint(sheet, z)) - m * log_phi(base, SheetPoint(sheet, z))
        assert abs(diff.real) < 1e-10 * m
        assert abs(math.remainder(diff.imag, 2 * math.pi)) < 1e-9 * m


def test_ratio_exponent_sign_matches_regions(pushed_solution, surfaces):
    ev = surfaces["pushed"]
    xs, ys = np.linspace(-1.5, 3.5, 26), np.array([-0.7, -0.25, 0.15, 0.5])
    dm = divergence_regions(pushed_solution, (xs, ys))
    for i in range(2):
        for iy, y in enumerate(ys):
            for ix, x in enumerate(xs):
                lab = dm.labels[i][iy, ix]
                if lab == 0:
                    continue
                r = ratio_exponent(ev, complex(x, y), i)
                assert np.sign(r) == -lab


def test_ratio_exponent_vanishes_on_support(surfaces):
    ev = surfaces["symmetric"]
    for x in (-0.8, 0.5):
        assert abs(ratio_exponent(ev, complex(x, 1e-9), 0 if x < 0 else 1)) < 1e-7


def test_off_ray_index_recomputes_equilibrium(sym_solution):
    sol = equilibrium_for(SYMMETRIC, (4, 3), sym_solution)
    assert sol is not sym_solution
    assert sol.c == pytest.approx((4 / 7, 3 / 7))
    assert equilibrium_for(SYMMETRIC, (5, 5), sym_solution) is sym_solution


def test_cut_needs_side(surfaces):
    with pytest.raises(BranchError):
        log_phi(surfaces["symmetric"], SheetPoint(0, 0.5))
    with pytest.raises(ValueError):
        SheetPoint(-1, 0.0)


def test_wrong_phases_break_product(surfaces):
    ev = surfaces["symmetric"]
    bad = SurfaceEvaluator(ev.solution, ev.multi_index, ev.kappa, ev.gap_zeros, (ev.phases[0] + 0.1,) + ev.phases[1:])
    assert abs(sheet_sum_log_phi(bad, 2.0 + 1j)) > 0.05
