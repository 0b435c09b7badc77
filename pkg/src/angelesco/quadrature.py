"""Singularity-aware quadrature, Cauchy transforms and Chebyshev-series kernels.

Double-precision paths use numpy arrays; passing ``bits`` switches to mpmath
at that working precision. Gauss-Jacobi rules come from the Golub-Welsch
eigenproblem of the Jacobi recurrence (scipy in double, mpmath otherwise).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import gmpy2
import mpmath as mp
import numpy as np
from scipy import fft as sfft
from scipy.special import roots_jacobi

from .weights import BranchError, SingularPoint, WeightSpec, continue_weight, weight_values

TWO_PI_I = 2j * math.pi


@dataclass(frozen=True)
class QuadratureRule:
    nodes: tuple
    weights: tuple
    endpoint_exponents: tuple  # (left, right)
    interval: tuple = (-1.0, 1.0)


@dataclass(frozen=True)
class PrecisionPolicy:
    start_bits: int = 128
    max_bits: int = 4096
    escalation_factor: float = 2.0
    target_residual: float = 1e-30

    def __post_init__(self):
        if self.start_bits < 53:
            raise ValueError("start_bits must be at least 53")
        if not self.escalation_factor > 1:
            raise ValueError("escalation_factor must exceed 1")
        if self.max_bits < self.start_bits:
            raise ValueError("max_bits below start_bits")

    def schedule(self):
        bits = self.start_bits
        while bits <= self.max_bits:
            yield bits
            bits = int(math.ceil(bits * self.escalation_factor))


@lru_cache(maxsize=256)
def _reference_rule_double(m: int, alpha: float, beta: float):
    x, w = roots_jacobi(m, alpha, beta)
    return np.asarray(x, dtype=float), np.asarray(w, dtype=float)


def jacobi_recurrence(m: int, alpha, beta):
    """Diagonal d, off-diagonal e and total mass of the Jacobi matrix at working precision."""
    alpha, beta = mp.mpf(alpha), mp.mpf(beta)
    ab = alpha + beta
    mass = mp.power(2, ab + 1) * mp.gamma(alpha + 1) * mp.gamma(beta + 1) / mp.gamma(ab + 2)
    d, e = [], []
    for i in range(m):
        j = i + 1
        abi = 2 * j + ab
        if i == 0:
            d.append((beta - alpha) / (ab + 2))
            e.append(mp.sqrt(4 * (1 + alpha) * (1 + beta) / ((ab + 3) * (ab + 2) ** 2)))
        else:
            d.append((beta * beta - alpha * alpha) / ((abi - 2) * abi))
            e.append(mp.sqrt(4 * j * (j + alpha) * (j + beta) * (j + ab) / ((abi * abi - 1) * abi * abi)))
    return d, e, mass


def _to_gmp(v):
    sign, man, exp, _ = mp.mpf(v)._mpf_
    r = gmpy2.mul_2exp(gmpy2.mpfr(man), exp)
    return -r if sign else r


def _from_gmp(v):
    man, exp = v.as_mantissa_exp()
    return mp.mpf((int(man), int(exp)))


def _orthonormal_values(x, m, d, e, p0):
    """p_m(x), p_m'(x) and sum_{k<m} p_k(x)^2 for the orthonormal recurrence (gmpy2 scalars)."""
    zero = gmpy2.mpfr(0)
    p_prev, p = zero, p0
    dp_prev, dp = zero, zero
    ssq = zero
    e_prev = zero
    for k in range(m):
        ssq += p * p
        t = x - d[k]
        p_next = (t * p - e_prev * p_prev) / e[k]
        dp_next = (t * dp + p - e_prev * dp_prev) / e[k]
        p_prev, p, dp_prev, dp, e_prev = p, p_next, dp, dp_next, e[k]
    return p, dp, ssq


@lru_cache(maxsize=512)
def _reference_rule_mp(m: int, alpha: float, beta: float, bits: int):
    """Golub-Welsch nodes in double precision polished by Newton's method.

    Newton steps run at doubling precision on the orthonormal Jacobi
    recurrence, and the weights are the Christoffel numbers 1 / sum p_k(x)^2.
    Cost is O(m^2) per precision level instead of the O(m^3) of a full
    eigenvector computation; the inner loop runs on MPFR scalars.
    """
    x0, _ = _reference_rule_double(m, alpha, beta)
    levels = []
    b = bits + 32
    while b > 53:
        levels.append(b)
        b //= 2
    levels = levels[::-1] + [bits + 32]
    xs = [gmpy2.mpfr(float(v)) for v in x0]
    for prec in levels:
        with mp.workprec(prec):
            d, e, mass = jacobi_recurrence(m, alpha, beta)
            with gmpy2.context(gmpy2.context(), precision=prec):
                dg, eg = [_to_gmp(v) for v in d], [_to_gmp(v) for v in e]
                p0 = 1 / gmpy2.sqrt(_to_gmp(mass))
                new = []
                for x in xs:
                    x = gmpy2.mpfr(x)
                    p, dp, _ = _orthonormal_values(x, m, dg, eg, p0)
                    new.append(x - p / dp)
                xs = new
            if prec == levels[-1]:
                with gmpy2.context(gmpy2.context(), precision=prec):
                    ws = [1 / _orthonormal_values(x, m, dg, eg, p0)[2] for x in xs]
    with mp.workprec(bits):
        return tuple(+_from_gmp(v) for v in xs), tuple(+_from_gmp(v) for v in ws)


def gauss_jacobi(m: int, alpha: float, beta: float, interval=(-1.0, 1.0), bits: int | None = None) -> QuadratureRule:
    """m-point rule for (x - a)^beta (b - x)^alpha on [a, b].

    alpha is the exponent at the right endpoint and beta at the left one.
    """
    if m < 1:
        raise ValueError("m must be positive")
    if not (alpha > -1 and beta > -1):
        raise ValueError("Jacobi exponents must exceed -1")
    a, b = interval
    if bits is None:
        t, wt = _reference_rule_double(int(m), float(alpha), float(beta))
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        nodes = mid + half * t
        weights = wt * half ** (alpha + beta + 1)
        return QuadratureRule(tuple(nodes), tuple(weights), (beta, alpha), (a, b))
    t, wt = _reference_rule_mp(int(m), float(alpha), float(beta), int(bits))
    with mp.workprec(bits):
        a, b = mp.mpf(a), mp.mpf(b)
        mid, half = (a + b) / 2, (b - a) / 2
        scale = mp.power(half, mp.mpf(alpha) + mp.mpf(beta) + 1)
        nodes = tuple(mid + half * v for v in t)
        weights = tuple(scale * v for v in wt)
    return QuadratureRule(nodes, weights, (beta, alpha), interval)


def _piece_factor_double(w: WeightSpec, j: int, xs: np.ndarray) -> np.ndarray:
    """rho on piece [x_j, x_{j+1}] divided by the two Jacobi end factors."""
    val = w.regular(xs).astype(complex)
    for k, s in enumerate(w.singular):
        if k in (j, j + 1) or s.exponent == 0:
            continue
        val = val * np.abs(xs - s.position) ** s.exponent
    jump = 1 + 0j
    for s in w.singular[1 : j + 1]:
        jump *= complex(s.jump)
    return val * jump


def _piece_factor_mp(w: WeightSpec, j: int, x):
    val = w.regular.mp_value(x)
    for k, s in enumerate(w.singular):
        if k in (j, j + 1) or s.exponent == 0:
            continue
        val *= mp.power(abs(x - mp.mpf(s.position)), mp.mpf(s.exponent))
    for s in w.singular[1 : j + 1]:
        if complex(s.jump) != 1:
            val *= mp.mpc(s.jump)
    return val


def weighted_nodes(w: WeightSpec, m_per_piece: int, bits: int | None = None):
    """Nodes x_k and complex weights W_k with sum W_k g(x_k) ~ int g rho dx.

    Pieces are split at interior singular points, each integrated with the
    Gauss-Jacobi rule matching the exponents at its two ends. For even weights
    the node set is made exactly symmetric so paired sums cancel exactly.
    """
    sing = w.singular
    xs_all, ws_all = [], []
    for j in range(len(sing) - 1):
        left, right = sing[j], sing[j + 1]
        rule = gauss_jacobi(m_per_piece, right.exponent, left.exponent, (left.position, right.position), bits)
        if bits is None:
            nodes = np.array(rule.nodes)
            xs_all.append(nodes)
            ws_all.append(np.array(rule.weights) * _piece_factor_double(w, j, nodes))
        else:
            with mp.workprec(bits):
                xs_all.extend(rule.nodes)
                ws_all.extend(wt * _piece_factor_mp(w, j, x) for x, wt in zip(rule.nodes, rule.weights))
    if bits is None:
        xs, ws = np.concatenate(xs_all), np.concatenate(ws_all)
        if w.is_even:
            n = len(xs)
            xs = 0.5 * (xs - xs[::-1])
            ws = 0.5 * (ws + ws[::-1])
            if n % 2:
                xs[n // 2] = 0.0
        return xs, ws
    xs, ws = list(xs_all), list(ws_all)
    if w.is_even:
        n = len(xs)
        with mp.workprec(bits):
            for k in range(n // 2):
                x = (xs[n - 1 - k] - xs[k]) / 2
                v = (ws[k] + ws[n - 1 - k]) / 2
                xs[k], xs[n - 1 - k] = -x, x
                ws[k], ws[n - 1 - k] = v, v
            if n % 2:
                xs[n // 2] = mp.mpf(0)
    return xs, ws


def paired_sum(terms):
    """Sum with mirrored terms added first; exact zero for odd integrands on symmetric nodes."""
    n = len(terms)
    total = 0
    for k in range(n // 2):
        total += terms[k] + terms[n - 1 - k]
    if n % 2:
        total += terms[n // 2]
    return total


def _poly_eval(coeffs, x):
    acc = 0
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def _check_poles(w: WeightSpec, poles):
    a, b = w.interval
    for q in poles or ():
        q = complex(q)
        if q.imag == 0 and a <= q.real <= b:
            raise ValueError(f"integrand pole {q} on the interval [{a}, {b}]")


def integrate_weighted(w: WeightSpec, g, m_per_piece: int = 64, bits: int | None = None, poles=None):
    """int_a^b g(x) rho(x) dx.

    g is either a sequence of ascending polynomial coefficients or a callable
    (vectorised over numpy arrays in double mode, scalar in mpmath mode).
    Poles of a rational g are passed through ``poles`` and must avoid [a, b].
    """
    _check_poles(w, poles)
    xs, ws = weighted_nodes(w, m_per_piece, bits)
    if callable(g):
        fn = g
    else:
        coeffs = list(g)
        fn = lambda x: _poly_eval(coeffs, x)  # noqa: E731
    if bits is None:
        vals = np.asarray(fn(xs), dtype=complex) * ws
        return complex(paired_sum(list(vals)) if w.is_even else np.sum(vals))
    with mp.workprec(bits):
        terms = [wt * fn(x) for x, wt in zip(xs, ws)]
        return paired_sum(terms) if w.is_even else mp.fsum(terms)


def _dist_to_interval(z: complex, a: float, b: float) -> float:
    x = min(max(z.real, a), b)
    return abs(complex(z.real - x, z.imag))


def cauchy_transform(w: WeightSpec, z, m_per_piece: int = 64, bits: int | None = None, tol: float | None = None, max_m: int | None = None):
    """f(z) = (1/2 pi i) int rho(x) / (x - z) dx for z off [a, b].

    Near the interval (distance < 0.05 (b - a)) the node count is doubled until
    two successive values agree to ``tol``.
    """
    a, b = w.interval
    zc = complex(z)
    if zc.imag == 0 and a <= zc.real <= b:
        raise ValueError(f"z={zc} lies on the interval [{a}, {b}]")
    near = _dist_to_interval(zc, a, b) < 0.05 * (b - a)
    if bits is None:
        tol = 1e-14 if tol is None else tol
        max_m = 1 << 14 if max_m is None else max_m

        def value(m):
            xs, ws = weighted_nodes(w, m)
            terms = ws / (xs - zc)
            return complex(np.sum(terms)) / TWO_PI_I, 1e-16 * float(np.sum(np.abs(terms)))
    else:
        tol = 2.0 ** (-bits + 8) if tol is None else tol
        max_m = 4096 if max_m is None else max_m

        def value(m):
            xs, ws = weighted_nodes(w, m, bits)
            with mp.workprec(bits):
                zz = mp.mpc(z)
                return mp.fsum(wt / (x - zz) for x, wt in zip(xs, ws)) / (2j * mp.pi), 0.0

    m = m_per_piece
    val, _ = value(m)
    if not near:
        return val
    prev = math.inf
    while m < max_m:
        m *= 2
        new, noise = value(m)
        diff = abs(new - val)
        # in double mode the rounding noise of the sum bounds what doubling can show
        if diff <= tol * max(1.0, abs(new)) + 16 * noise:
            return new
        # double-precision rules for large m stop improving: accept the plateau
        if bits is None and diff >= prev and prev <= 1e-8 * max(1.0, abs(val)):
            return val
        prev = diff
        val = new
    raise RuntimeError(f"Cauchy transform did not converge at z={zc} with {m} nodes per piece")


def _arc_piece(w: WeightSpec, j: int, x: float, side: int, m: int) -> complex:
    """int rho(t)/(t - x) dt over piece j, bent to the half-plane opposite to ``side``.

    The path t(s) = c + r (s - i side k (1 - s^2)) keeps the piece's endpoints,
    so the Jacobi end factors are still absorbed by the Gauss-Jacobi rule in s,
    and the continuation of rho across the piece is the split-(j+1) one.
    """
    sing = w.singular
    left, right = sing[j], sing[j + 1]
    c, r = 0.5 * (left.position + right.position), 0.5 * (right.position - left.position)
    k = 0.5
    rule = gauss_jacobi(m, right.exponent, left.exponent)
    s = np.array(rule.nodes)
    bend = 1 - 1j * side * k * (1 - s)  # (t - x_j) / (r (1 + s))
    bend_r = 1 + 1j * side * k * (1 + s)  # (x_{j+1} - t) / (r (1 - s))
    t = c + r * (s - 1j * side * k * (1 - s * s))
    dt = r * (1 + 2j * side * k * s)
    inner = _strip_ends(w, j)
    total = 0j
    for tk, bl, br, dk, wk in zip(t, bend, bend_r, dt, rule.weights):
        # rho continued, with (t - x_j)^a and (x_{j+1} - t)^b written relative to the rule weight
        val = continue_weight(inner, tk, j + 1)
        val *= (r * bl) ** complex(left.exponent) * (r * br) ** complex(right.exponent)
        total += wk * val * dk / (tk - x)
    return total


def _strip_ends(w: WeightSpec, j: int) -> WeightSpec:
    """Copy of w with zero exponents at the ends of piece j (their factors are handled separately)."""
    sing = list(w.singular)
    for k in (j, j + 1):
        sing[k] = SingularPoint(sing[k].position, 0.0, sing[k].jump)
    return WeightSpec(w.interval, w.regular, tuple(sing))


def cauchy_boundary_value(w: WeightSpec, x: float, side: int, m: int = 64, tol: float = 1e-14) -> complex:
    """Side limit f_+(x) (side=+1) or f_-(x) (side=-1) at a point inside the interval.

    The piece containing x is deformed into the opposite half-plane, which moves
    the pole away from the path without crossing it; other pieces are integrated
    on the real line. Node counts double until two values agree to ``tol``.
    """
    sing = w.singular
    if side not in (1, -1):
        raise ValueError("side must be +1 or -1")
    if not sing[0].position < x < sing[-1].position or any(x == s.position for s in sing):
        raise ValueError(f"x={x} is not a regular interior point")
    j = max(k for k in range(len(sing) - 1) if sing[k].position < x)

    def value(n):
        tot = _arc_piece(w, j, x, side, n)
        for k in range(len(sing) - 1):
            if k == j:
                continue
            rule = gauss_jacobi(n, sing[k + 1].exponent, sing[k].exponent, (sing[k].position, sing[k + 1].position))
            nodes = np.array(rule.nodes)
            tot += complex(np.sum(np.array(rule.weights) * _piece_factor_double(w, k, nodes) / (nodes - x)))
        return tot / TWO_PI_I

    val = value(m)
    prev = math.inf
    while m < 4096:
        m *= 2
        new = value(m)
        diff = abs(new - val)
        if diff <= tol * max(1.0, abs(new)):
            return new
        # double-precision Jacobi rules plateau around 1e-11 for large m
        if diff >= prev and prev <= 1e-9 * max(1.0, abs(val)):
            return val
        prev, val = diff, new
    raise RuntimeError(f"boundary value at x={x} did not converge")


# ---------------------------------------------------------------------------
# Chebyshev and Joukowski kernels shared by equilibrium and Szego solvers.
#
# A support [a*, b*] is mapped to s in [-1, 1] by x = m + r s. phi(s) is the
# exterior Joukowski inverse, phi ~ 2s at infinity, |phi| > 1 off [-1, 1].
# On the cut phi_{+-}(cos t) = exp(+-i t).


def to_unit(x, support):
    a, b = support
    return (2 * np.asarray(x) - (a + b)) / (b - a)


def joukowski(s, side: int | None = None):
    """phi(s) and sqrt(s^2 - 1) (branch ~ s) for s off [-1, 1]; side limits on it."""
    s = np.asarray(s, dtype=complex)
    on_cut = (s.imag == 0) & (np.abs(s.real) <= 1)
    if np.any(on_cut) and side is None:
        raise BranchError("point on [-1, 1] without a side flag")
    root = np.sqrt(s - 1) * np.sqrt(s + 1)
    if np.any(on_cut):
        sr = np.clip(s.real, -1.0, 1.0)
        root = np.where(on_cut, side * 1j * np.sqrt(1 - sr * sr), root)
    return s + root, root


def log_phi(s, side: int | None = None):
    """Principal log(phi(s)) with branch (-inf, -1] handled by the side flag."""
    s = np.asarray(s, dtype=complex)
    phi, _ = joukowski(s, side)
    out = np.log(phi)
    neg = (s.imag == 0) & (s.real < -1)
    if np.any(neg):
        if side is None:
            raise BranchError("point on (-inf, -1) without a side flag")
        out = np.where(neg, np.log(np.abs(phi)) + side * 1j * np.pi, out)
    cut = (s.imag == 0) & (np.abs(s.real) <= 1)
    if np.any(cut):
        t = np.arccos(np.clip(s.real, -1, 1))
        out = np.where(cut, side * 1j * t, out)
    return out


def power_series(coeffs, u):
    """sum_k coeffs[k] u^k by Horner; u may be an array."""
    u = np.asarray(u, dtype=complex)
    acc = np.zeros_like(u)
    for c in coeffs[::-1]:
        acc = acc * u + c
    return acc


def cheb_coefficients(values) -> np.ndarray:
    """Chebyshev coefficients from samples at first-kind points (increasing order)."""
    v = np.asarray(values)[::-1]
    n = len(v)
    if np.iscomplexobj(v):
        c = sfft.dct(v.real, type=2) + 1j * sfft.dct(v.imag, type=2)
    else:
        c = sfft.dct(v, type=2)
    c = c / n
    c[0] /= 2
    return c


def cheb_nodes(n: int) -> np.ndarray:
    """First-kind Chebyshev points on [-1, 1], increasing."""
    k = np.arange(n)
    return -np.cos((2 * k + 1) * np.pi / (2 * n))


def log_potential(density, z, side: int | None = None):
    """(V(z), int log(z - x) d nu(x)) for a Chebyshev-represented density."""
    return density.potential(z, side=side), density.log_integral(z, side=side)
