from __future__ import annotations

import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from angelesco.equilibrium import arcsine
from angelesco.quadrature import (
    PrecisionPolicy,
    cauchy_boundary_value,
    cauchy_transform,
    gauss_jacobi,
    integrate_weighted,
    log_potential,
)
from angelesco.weights import RegularPart, SingularPoint, WeightSpec, eval_weight


def test_midpoint_rule():
    r = gauss_jacobi(1, 0, 0)
    assert r.nodes == pytest.approx((0.0,), abs=1e-16)
    assert r.weights == pytest.approx((2.0,))


def test_two_point_legendre():
    r = gauss_jacobi(2, 0, 0)
    assert r.nodes == pytest.approx((-1 / math.sqrt(3), 1 / math.sqrt(3)))
    assert r.weights == pytest.approx((1.0, 1.0))


def test_chebyshev_gauss_closed_form():
    r = gauss_jacobi(3, -0.5, -0.5)
    ref = sorted(math.cos(math.pi * (2 * k - 1) / 6) for k in (1, 2, 3))
    assert r.nodes == pytest.approx(ref, abs=1e-15)
    assert r.weights == pytest.approx((math.pi / 3,) * 3)


def test_rejects_bad_parameters():
    with pytest.raises(ValueError):
        gauss_jacobi(0, 0, 0)
    with pytest.raises(ValueError):
        gauss_jacobi(3, -1.0, 0)
    with pytest.raises(ValueError):
        PrecisionPolicy(start_bits=32)


@pytest.mark.parametrize("m,alpha,beta", [(5, 0.3, -0.7), (12, -0.5, 1.5), (20, 2.25, -0.25)])
def test_matches_mpmath_golub_welsch(m, alpha, beta):
    # mpmath's own Golub-Welsch route for the same weight (1-x)^alpha (1+x)^beta
    with mp.workprec(200):
        X, W = mp.gauss_quadrature(m, "jacobi", alpha, beta)
        ref_x = [X[k] for k in range(m)]
        ref_w = [W[k] for k in range(m)]
    r = gauss_jacobi(m, alpha, beta, bits=200)
    with mp.workprec(200):
        assert max(abs(a - b) for a, b in zip(r.nodes, ref_x)) < mp.mpf(10) ** -50
        assert max(abs(a - b) / b for a, b in zip(r.weights, ref_w)) < mp.mpf(10) ** -50


@given(st.integers(1, 25), st.floats(-0.95, 3.0), st.floats(-0.95, 3.0))
def test_exactness_against_beta_function(m, alpha, beta):
    r = gauss_jacobi(m, alpha, beta, interval=(0.0, 1.0), bits=160)
    with mp.workprec(160):
        for k in sorted({0, m, 2 * m - 1}):
            got = mp.fsum(w * x**k for x, w in zip(r.nodes, r.weights))
            ref = mp.beta(mp.mpf(beta) + k + 1, mp.mpf(alpha) + 1)
            assert abs(got / ref - 1) < mp.mpf(2) ** -140


def test_nodes_increase_inside_interval():
    r = gauss_jacobi(30, 0.5, -0.5, interval=(2.0, 5.0))
    xs = np.array(r.nodes)
    assert np.all(np.diff(xs) > 0) and xs[0] > 2.0 and xs[-1] < 5.0
    assert r.endpoint_exponents == (-0.5, 0.5)


def test_integrate_examples():
    assert integrate_weighted(WeightSpec((0, 1)), [0, 1]) == pytest.approx(0.5)
    w = WeightSpec((0, 1), singular=(SingularPoint(0, -0.5), SingularPoint(1)))
    assert integrate_weighted(w, [1]) == pytest.approx(2.0)
    w = WeightSpec((0, 1), singular=(SingularPoint(0), SingularPoint(0.5, 0.0, 2.0), SingularPoint(1)))
    assert integrate_weighted(w, [1]) == pytest.approx(1.5)


def test_pole_on_interval_rejected():
    with pytest.raises(ValueError):
        integrate_weighted(WeightSpec((0, 1)), lambda x: 1 / (x - 0.5), poles=[0.5])


def test_doubling_gate_for_polynomials():
    w = WeightSpec((-1, 1), RegularPart("exp-polynomial", (0.0, 0.5j)), (SingularPoint(-1, -0.3), SingularPoint(0.4, 0.2, 1j), SingularPoint(1, 0.6)))
    g = list(np.cos(np.arange(41)))
    a = integrate_weighted(w, g, 64, bits=128)
    b = integrate_weighted(w, g, 128, bits=128)
    assert abs(a - b) < 1e-30 * abs(b)


def test_cauchy_transform_closed_form():
    val = cauchy_transform(WeightSpec((-1, 1)), 2.0)
    assert complex(val) == pytest.approx(1j * math.log(3) / (2 * math.pi), rel=1e-14)


def test_cauchy_transform_laurent():
    z = 1e6 * (0.6 + 0.8j)
    val = complex(cauchy_transform(WeightSpec((-1, 1)), z))
    assert z * val == pytest.approx(-2 / (2j * math.pi), rel=1e-6)


def test_cauchy_transform_on_interval_raises():
    with pytest.raises(ValueError):
        cauchy_transform(WeightSpec((-1, 1)), 0.3)


def test_near_interval_doubling():
    w = WeightSpec((-1, 1))
    z = 0.2 + 0.01j
    ref = (mp.log(1 - z) - mp.log(-1 - z)) / (2j * mp.pi)
    assert complex(cauchy_transform(w, z, tol=1e-13)) == pytest.approx(complex(ref), rel=1e-12)


FH = WeightSpec((-1, 1), RegularPart("polynomial", (1.0, 0.3j)), (SingularPoint(-1, -0.5), SingularPoint(0.1, 0.4, 2.0), SingularPoint(1, 0.25)))


@given(st.floats(-0.9, 0.9))
def test_plemelj_residual(x):
    if abs(x - 0.1) < 0.02:
        return
    jump = cauchy_boundary_value(FH, x, 1) - cauchy_boundary_value(FH, x, -1)
    assert abs(jump - eval_weight(FH, x)) < 1e-9


def test_arcsine_potentials():
    d = arcsine((-1, 1))
    V0, _ = log_potential(d, 0.0, side=1)
    V2, L2 = log_potential(d, 2.0)
    assert float(np.real(V0)) == pytest.approx(math.log(2), abs=1e-14)
    assert float(np.real(V2)) == pytest.approx(math.log(2) - math.log(2 + math.sqrt(3)), abs=1e-14)
    assert complex(np.ravel(L2)[0]).real == pytest.approx(-float(np.real(V2)), abs=1e-14)


def test_zero_density_potential():
    d = arcsine((-1, 1), mass=0.0)
    assert float(np.real(d.potential(np.array([3.0 + 1j]))[0])) == 0.0
