"""Type II Hermite-Pade approximants of an Angelesco system.

Q_n is found from the orthogonality conditions int Q x^k rho_i dx = 0
(k < n_i). Numerically the conditions are imposed in a Chebyshev basis
(Chebyshev polynomials of each interval against Chebyshev polynomials of the
convex hull), which spans the same space and is far better conditioned than
raw moments. Accuracy is certified independently by the scaled residual of
the raw monomial conditions evaluated at elevated precision, and the working
precision is escalated until that residual passes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import mpmath as mp

from .quadrature import PrecisionPolicy, paired_sum, weighted_nodes
from .weights import AngelescoSystem, WeightSpec

GUARD_BITS = 64


class ConsistencyError(RuntimeError):
    """Two independent evaluations of the same quantity disagree."""


class PoleError(ZeroDivisionError):
    """Evaluation at a zero of Q_n."""


@dataclass(frozen=True)
class MultiIndex:
    entries: tuple

    def __post_init__(self):
        e = tuple(int(v) for v in self.entries)
        if not e or any(v < 0 for v in e):
            raise ValueError("multi-index entries must be nonnegative integers")
        object.__setattr__(self, "entries", e)

    @property
    def total(self) -> int:
        return sum(self.entries)

    @property
    def p(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    def __len__(self):
        return len(self.entries)


@dataclass(frozen=True, eq=False)
class HermitePadeResult:
    index: MultiIndex
    Q: tuple  # ascending monomial coefficients, Q[-1] == 1
    P: tuple  # per component, ascending coefficients of degree <= |n| - 1
    ortho_residual: float
    precision_bits: int
    normal: bool
    eval_bits: int = 0  # precision at which Q and P coefficients are stored
    diagnostics: dict = field(default_factory=dict)

    @property
    def degree(self) -> int:
        return len(self.Q) - 1

    def q_eval(self, z):
        with mp.workprec(self.eval_bits):
            return mp.polyval(list(reversed(self.Q)), mp.mpmathify(z))

    def p_eval(self, i: int, z):
        with mp.workprec(self.eval_bits):
            return mp.polyval(list(reversed(self.P[i])), mp.mpmathify(z)) if self.P[i] else mp.mpc(0)

    def q_float(self) -> list:
        return [complex(c) for c in self.Q]


# ---------------------------------------------------------------------------
# quadrature helpers at working precision


@lru_cache(maxsize=256)
def _nodes(w: WeightSpec, m: int, bits: int):
    return weighted_nodes(w, m, bits)


def _exact_node_count(w: WeightSpec, degree: int) -> int | None:
    deg_r = w.regular.degree
    if deg_r is None or w.interior:
        return None
    return max(1, (degree + deg_r) // 2 + 1)


def rule_for(w: WeightSpec, degree: int, bits: int):
    """Nodes/weights integrating x^k rho, k <= degree, to working precision.

    Exact Gauss-Jacobi counts are used when the integrand is a polynomial
    times the Jacobi factors; otherwise the node count is doubled until the
    moments up to ``degree`` settle.
    """
    m = _exact_node_count(w, degree)
    if m is not None:
        return _nodes(w, m, bits)
    m = max(16, degree // 2 + 16)
    prev = _moments_from(_nodes(w, m, bits), degree, bits, False)
    while True:
        m *= 2
        cur = _moments_from(_nodes(w, m, bits), degree, bits, False)
        with mp.workprec(bits):
            scale = max(abs(v) for v in cur) or mp.mpf(1)
            if max(abs(x - y) for x, y in zip(cur, prev)) <= scale * mp.ldexp(1, -bits + 8):
                return _nodes(w, m, bits)
        if m > 4096:
            raise RuntimeError("moment quadrature did not settle")
        prev = cur


def _moments_from(rule, kmax, bits, symmetric):
    xs, ws = rule
    out = []
    with mp.workprec(bits):
        powers = list(ws)
        for k in range(kmax + 1):
            out.append(paired_sum(powers) if symmetric else mp.fsum(powers))
            powers = [t * x for t, x in zip(powers, xs)]
    return out


def moments(w: WeightSpec, kmax: int, bits: int = 128) -> list:
    """m_k = int x^k rho(x) dx, k = 0..kmax (exact zeros for odd k of even weights)."""
    if kmax < 0:
        raise ValueError("kmax must be nonnegative")
    return _moments_from(rule_for(w, kmax, bits), kmax, bits, w.is_even)


def _cheb_values(u, n):
    """[T_0(u), ..., T_{n-1}(u)]."""
    vals = [mp.mpf(1), u][:n]
    while len(vals) < n:
        vals.append(2 * u * vals[-1] - vals[-2])
    return vals


def _cheb_to_monomial(coeffs, lo, hi):
    """Ascending monomial coefficients of sum_j coeffs[j] T_j((2x - lo - hi)/(hi - lo))."""
    n = len(coeffs)
    s, t = 2 / (hi - lo), -(hi + lo) / (hi - lo)  # u = s x + t
    out = [mp.mpf(0)] * n
    prev, cur = [mp.mpf(1)], [t, s]
    out[0] += coeffs[0]
    if n > 1:
        out[0] += coeffs[1] * t
        out[1] += coeffs[1] * s
    for j in range(2, n):
        nxt = [mp.mpf(0)] * (j + 1)
        for k, c in enumerate(cur):
            nxt[k] += 2 * t * c
            nxt[k + 1] += 2 * s * c
        for k, c in enumerate(prev):
            nxt[k] -= c
        prev, cur = cur, nxt
        for k, c in enumerate(cur):
            out[k] += coeffs[j] * c
    return out


def _hull(sys: AngelescoSystem):
    return sys.components[0].a, sys.components[-1].b


def _solve_at(sys: AngelescoSystem, n: MultiIndex, bits: int):
    """Scaled Chebyshev coefficients c' with T~_N + sum c'_j T~_j proportional to Q."""
    N = n.total
    A, B = _hull(sys)
    rows, rhs = [], []
    with mp.workprec(bits):
        Am, Bm = mp.mpf(A), mp.mpf(B)
        for w, ni in zip(sys.components, n):
            if ni == 0:
                continue
            xs, ws = rule_for(w, N + ni, bits)
            a, b = mp.mpf(w.a), mp.mpf(w.b)
            acc = [[mp.mpf(0)] * (N + 1) for _ in range(ni)]
            for x, wt in zip(xs, ws):
                lk = _cheb_values((2 * x - a - b) / (b - a), ni)
                tj = _cheb_values((2 * x - Am - Bm) / (Bm - Am), N + 1)
                for k in range(ni):
                    f = wt * lk[k]
                    row = acc[k]
                    for j in range(N + 1):
                        row[j] += f * tj[j]
            for row in acc:
                scale = max(abs(v) for v in row)
                if scale == 0:
                    scale = mp.mpf(1)
                rows.append([v / scale for v in row[:N]])
                rhs.append(-row[N] / scale)
        G = mp.matrix(rows)
        try:
            LU, _ = mp.mp.LU_decomp(G.copy())
            piv = [abs(LU[k, k]) for k in range(N)]
            # rows are scaled to unit max norm (right-hand side included), so a
            # pivot at the rounding floor means singular to working precision
            if N and min(piv) < mp.ldexp(1, -(3 * bits) // 4):
                return None, G
            sol = mp.lu_solve(G, mp.matrix(rhs))
        except ZeroDivisionError:
            return None, G
    return [sol[j] for j in range(N)], G


def _lead(N, A, B):
    """Leading coefficient of T_N((2x - A - B)/(B - A))."""
    if N == 0:
        return mp.mpf(1)
    return mp.ldexp(1, N - 1) * mp.power(2 / (mp.mpf(B) - mp.mpf(A)), N)


def _growth_bits(q, A, B) -> int:
    N = len(q) - 1
    R = max(abs(A), abs(B))
    big = sum(abs(c) * mp.power(R, j) for j, c in enumerate(q))
    small = mp.power((mp.mpf(B) - mp.mpf(A)) / 4, N)
    return max(0, int(mp.ceil(mp.log(big / small, 2))))


def _ortho_residual(sys, n, q, bits):
    worst = mp.mpf(0)
    with mp.workprec(bits):
        for w, ni in zip(sys.components, n):
            if ni == 0:
                continue
            mom = moments(w, len(q) - 1 + ni - 1, bits)
            qnorm = mp.fsum(abs(c) for c in q)
            for k in range(ni):
                row = mom[k : k + len(q)]
                num = abs(mp.fdot(q, row))
                den = qnorm * max(abs(v) for v in row)
                if den > 0:
                    worst = max(worst, num / den)
    return float(worst)


def _polynomial_parts(sys, n, q, bits):
    N = len(q) - 1
    out = []
    with mp.workprec(bits):
        for w in sys.components:
            if N == 0:
                out.append(())
                continue
            mom = moments(w, N - 1, bits)
            coeffs = []
            for d in range(N):
                s = mp.fsum(q[d + k + 1] * mom[k] for k in range(N - d))
                coeffs.append(-s / (2j * mp.pi))
            out.append(tuple(coeffs))
    return tuple(out)


def solve(sys: AngelescoSystem, n, policy: PrecisionPolicy | None = None) -> HermitePadeResult:
    """Q_n (monic, degree |n|) and the polynomial parts P_n^(i)."""
    policy = policy or PrecisionPolicy()
    n = n if isinstance(n, MultiIndex) else MultiIndex(tuple(n))
    if n.p != sys.p:
        raise ValueError("multi-index length differs from the number of components")
    N = n.total
    A, B = _hull(sys)
    history = []
    best = None
    for bits in policy.schedule():
        coeffs, G = _solve_at(sys, n, bits)
        if coeffs is None:
            history.append((bits, "singular"))
            continue
        with mp.workprec(bits):
            cheb = [c for c in coeffs] + [mp.mpf(1)]
        conv_bits = bits + 4 * N + GUARD_BITS
        with mp.workprec(conv_bits):
            lead = _lead(N, A, B)
            q = [c / lead for c in _cheb_to_monomial(cheb, mp.mpf(A), mp.mpf(B))]
            q[-1] = mp.mpf(1)
            eval_bits = bits + _growth_bits(q, A, B) + GUARD_BITS
        with mp.workprec(max(eval_bits, conv_bits)):
            q = [+c for c in q]
        resid = _ortho_residual(sys, n, q, eval_bits)
        history.append((bits, resid))
        best = (bits, q, resid, eval_bits)
        if resid < policy.target_residual:
            break
    if best is None:
        return HermitePadeResult(n, tuple(), tuple(() for _ in sys.components), math.inf, policy.max_bits, False, 0, {"history": history, "reason": "singular moment matrix"})
    bits, q, resid, eval_bits = best
    normal = resid < policy.target_residual
    P = _polynomial_parts(sys, n, q, eval_bits)
    diag = {"history": history}
    if not normal:
        diag["reason"] = "orthogonality residual above target at max precision (possibly non-normal index)"
        with mp.workprec(bits):
            try:
                sv = mp.svd_r(G, compute_uv=False) if all(v.imag == 0 for v in G) else mp.svd_c(G, compute_uv=False)
                diag["singular_value_ratio"] = float(min(sv) / max(sv))
            except Exception:  # pragma: no cover - diagnostics only
                pass
    return HermitePadeResult(n, tuple(q), P, resid, bits, normal, eval_bits, diag)


# ---------------------------------------------------------------------------
# remainders


def _remainder_integral(res: HermitePadeResult, w: WeightSpec, z, bits: int, rel_tol):
    """Integral form of R at working precision ``bits``; returns (value, rounding floor)."""
    N = res.degree
    m = max(16, N // 2 + 32)
    if _exact_node_count(w, 0) is None:
        m = max(m, 64)
    with mp.workprec(bits):
        coeffs = [+c for c in reversed(res.Q)]
        absq = [abs(c) for c in coeffs]
        zz = mp.mpc(z)
        prev = None
        while True:
            xs, ws = _nodes(w, m, bits)
            terms, floor = [], mp.mpf(0)
            for x, wt in zip(xs, ws):
                d = x - zz
                terms.append(wt * mp.polyval(coeffs, x) / d)
                floor += abs(wt) * mp.polyval(absq, abs(x)) / abs(d)
            val = mp.fsum(terms) / (2j * mp.pi)
            floor *= mp.ldexp(1, -bits + 6) / (2 * mp.pi)
            if prev is not None and abs(val - prev) <= rel_tol * abs(val) + 4 * floor:
                return val, floor
            if m >= 2048:
                raise ConsistencyError(f"remainder quadrature did not settle at z={z}")
            prev = val
            m *= 2


def _remainder_certified(res, w, z, rel_tol):
    """Integral form with precision raised until rounding is below rel_tol * |R|."""
    bits = res.eval_bits
    for _ in range(4):
        R, floor = _remainder_integral(res, w, z, bits, rel_tol)
        if floor <= rel_tol * abs(R):
            return R, bits
        need = float(mp.log(floor / (rel_tol * max(abs(R), mp.mpf(2) ** (-10 * bits))), 2))
        bits = 64 * math.ceil((bits + need + 16) / 64)
    raise ConsistencyError(f"remainder at z={z} dominated by rounding even at {bits} bits")


def remainder(res: HermitePadeResult, sys: AngelescoSystem, i: int, z, check: bool = True, target: float = 1e-30):
    """R_n^(i)(z) = (1/2 pi i) int Q(x) rho_i(x) / (x - z) dx.

    With ``check`` the direct form Q f_i - P_i is evaluated at precision
    raised by the cancellation it suffers, and the two must agree to 1e3*target.
    """
    w = sys.components[i]
    zc = complex(z)
    if zc.imag == 0 and w.a <= zc.real <= w.b:
        raise ValueError(f"z={z} lies on interval {i + 1}")
    rtol = mp.mpf(target) * 10
    R, bits = _remainder_certified(res, w, z, rtol)
    if not check:
        return R
    with mp.workprec(bits):
        qz = abs(res.q_eval(z))
    from .quadrature import cauchy_transform

    # magnitude estimate of Q f for the cancellation budget
    f_est = abs(cauchy_transform(w, zc)) + 1e-300
    lost = max(0, int(math.ceil(math.log2(float(qz) * f_est / max(float(abs(R)), 1e-300)))))
    dbits = 64 * math.ceil((bits + lost + GUARD_BITS) / 64)
    with mp.workprec(dbits):
        fz = cauchy_transform(w, z, m_per_piece=max(64, res.degree), bits=dbits)
        zz = mp.mpc(z)
        # P_i recomputed at the raised precision from the same Q coefficients
        P = _polynomial_parts(AngelescoSystem((w,)), MultiIndex((res.degree,)), list(res.Q), dbits)[0]
        qf = mp.polyval(list(reversed(res.Q)), zz) * fz
        direct = qf - (mp.polyval(list(reversed(P)), zz) if P else 0)
        diff = abs(direct - R)
        tol = 1e3 * mp.mpf(target) * abs(R) + abs(qf) * mp.ldexp(1, -dbits + 32)
    if diff > tol:
        raise ConsistencyError(f"remainder forms disagree at z={z}: |diff|={mp.nstr(diff, 5)} vs tol {mp.nstr(tol, 5)}")
    return R


def approximant_error(res: HermitePadeResult, sys: AngelescoSystem, i: int, z, check: bool = False):
    """f_i(z) - P_i(z)/Q(z) = R_i(z)/Q(z)."""
    with mp.workprec(res.eval_bits):
        qz = res.q_eval(z)
        zz = mp.mpc(z)
        scale = mp.fsum(abs(c) * abs(zz) ** j for j, c in enumerate(res.Q))
        # coefficients carry about precision_bits of accuracy, not eval_bits
        if abs(qz) <= scale * mp.ldexp(1, -res.precision_bits + 8):
            raise PoleError(f"z={z} is (numerically) a zero of Q_n")
        return remainder(res, sys, i, z, check=check) / qz
