"""Multi-sheet Szego function via a coupled additive boundary-value problem.

Write L^(k) = log S^(k). The product identity gives L^(0) = -sum_i L^(i), and
the multiplicative jump S^(i)_+- = S^(0)_-+ rho_i w_{i+} on the i-th support
becomes, for each i,

    L^(i)_+ + L^(i)_- = -lambda_i - sum_{j != i} L^(j)   on [a_i*, b_i*],

with -lambda_i = log(rho_i w_{i+}). On a single cut the bounded solution of
G_+ + G_- = f is A[f](z) = (w(z) / 2 pi i) int f(x) / (w_+(x) (x - z)) dx,
which in u = 1/phi(s) acts as A[T_k] = u^k / 2. The logarithmic and jump
singularities of lambda_i have closed-form images under A; only the smooth
remainder log(i rho_r) and the coupling terms (analytic on the cut) are
collocated at Chebyshev points.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import mpmath as mp
import numpy as np

from .equilibrium import EquilibriumSolution
from .quadrature import cheb_coefficients, cheb_nodes, joukowski, power_series, to_unit
from .weights import AngelescoSystem, BranchError, WeightSpec, log_regular, weight_values

DEFAULT_MODES = 256
CERT_TOL = 1e-8


class SzegoError(RuntimeError):
    """Singular collocation system or failed certification."""


@dataclass(frozen=True)
class BranchFunctionW:
    """w_i(z) = sqrt((z - a)(z - b)) with w(z)/z -> 1 at infinity."""

    index: int
    branch_points: tuple

    @property
    def center(self) -> float:
        return 0.5 * (self.branch_points[0] + self.branch_points[1])

    @property
    def radius(self) -> float:
        return 0.5 * (self.branch_points[1] - self.branch_points[0])


def w_eval(w: BranchFunctionW, z, side: int | None = None):
    """The normalized branch; on the open cut w_{+-}(x) = +-i|w(x)|."""
    s = to_unit(np.asarray(z, dtype=complex), w.branch_points)
    _, root = joukowski(s, side)
    out = w.radius * root
    return complex(out) if np.ndim(out) == 0 else out


# closed-form images under A in the variable u = 1/phi, |u| <= 1


def a_log(tau0: float, u):
    """A[log|tau - tau0|]."""
    u = np.asarray(u, dtype=complex)
    if abs(tau0) <= 1:
        e = cmath.exp(1j * math.acos(max(-1.0, min(1.0, tau0))))
        return 0.5 * (-math.log(2) + np.log(1 - e * u) + np.log(1 - u / e))
    phi0 = abs(tau0) + math.sqrt(tau0 * tau0 - 1)
    sgn = 1.0 if tau0 > 0 else -1.0
    return 0.5 * math.log(phi0 / 2) + np.log(1 - sgn * u / phi0)


def a_chi(tau0: float, u):
    """A[indicator of [tau0, 1]]."""
    u = np.asarray(u, dtype=complex)
    if tau0 <= -1:
        return np.full_like(u, 0.5)
    if tau0 >= 1:
        return np.zeros_like(u)
    th = math.acos(tau0)
    e = cmath.exp(1j * th)
    return th / (2 * math.pi) + (np.log(1 - u / e) - np.log(1 - e * u)) / (2j * math.pi)


def a_log_mp(tau0: float, u):
    if abs(tau0) <= 1:
        e = mp.expj(mp.acos(max(-1.0, min(1.0, tau0))))
        return (-mp.log(2) + mp.log(1 - e * u) + mp.log(1 - u / e)) / 2
    t0 = mp.mpf(abs(tau0))
    phi0 = t0 + mp.sqrt(t0 * t0 - 1)
    sgn = 1 if tau0 > 0 else -1
    return mp.log(phi0 / 2) / 2 + mp.log(1 - sgn * u / phi0)


def a_chi_mp(tau0: float, u):
    if tau0 <= -1:
        return mp.mpf(1) / 2
    if tau0 >= 1:
        return mp.mpf(0)
    th = mp.acos(tau0)
    e = mp.expj(th)
    return th / (2 * mp.pi) + (mp.log(1 - u / e) - mp.log(1 - e * u)) / (2j * mp.pi)


@dataclass(frozen=True, eq=False)
class CutData:
    support: tuple
    values: np.ndarray  # smooth data D_i at the first-kind Chebyshev points
    coefficients: np.ndarray  # its Chebyshev coefficients
    log_terms: tuple  # (coefficient, tau0): coefficient * log|x - x0|
    jump_terms: tuple  # (log beta, tau0): log beta * indicator of [x0, b*]

    @property
    def center(self) -> float:
        return 0.5 * (self.support[0] + self.support[1])

    @property
    def radius(self) -> float:
        return 0.5 * (self.support[1] - self.support[0])

    def u(self, z, side=None):
        s = to_unit(np.asarray(z, dtype=complex), self.support)
        phi, _ = joukowski(s, side)
        return 1.0 / phi

    def singular_image(self, u):
        out = np.zeros_like(np.asarray(u, dtype=complex))
        lr = math.log(self.radius)
        for g, t0 in self.log_terms:
            out = out + g * (0.5 * lr + a_log(t0, u))
        for g, t0 in self.jump_terms:
            out = out + g * a_chi(t0, u)
        return out

    def smooth_image(self, u):
        return 0.5 * power_series(self.coefficients, u)

    def value(self, u):
        return self.smooth_image(u) + self.singular_image(u)

    def u_mp(self, z):
        a, b = (mp.mpf(v) for v in self.support)
        sv = (2 * mp.mpc(z) - (a + b)) / (b - a)
        if sv.imag == 0 and abs(sv.real) <= 1:
            raise BranchError("u_mp needs a point off the support")
        return 1 / (sv + mp.sqrt(sv - 1) * mp.sqrt(sv + 1))

    def value_mp(self, u):
        acc = mp.mpc(0)
        for c in reversed(self.coefficients):
            acc = acc * u + mp.mpc(complex(c))
        out = acc / 2
        lr = mp.log((mp.mpf(self.support[1]) - mp.mpf(self.support[0])) / 2)
        for g, t0 in self.log_terms:
            out += mp.mpf(g) * (lr / 2 + a_log_mp(t0, u))
        for g, t0 in self.jump_terms:
            out += mp.mpc(g) * a_chi_mp(t0, u)
        return out

    def to_dict(self) -> dict:
        return {
            "support": list(self.support),
            "values": [[float(v.real), float(v.imag)] for v in self.values],
            "log_terms": [list(t) for t in self.log_terms],
            "jump_terms": [[g.real, g.imag, t0] for g, t0 in self.jump_terms],
        }

    @classmethod
    def from_dict(cls, d) -> "CutData":
        vals = np.array([complex(a, b) for a, b in d["values"]])
        return cls(
            tuple(d["support"]),
            vals,
            _chop(cheb_coefficients(vals)),
            tuple((float(g), float(t)) for g, t in d["log_terms"]),
            tuple((complex(a, b), float(t)) for a, b, t in d["jump_terms"]),
        )


@dataclass(frozen=True, eq=False)
class SzegoEvaluator:
    cuts: tuple
    shift: complex  # common 2 pi i j/(p+1) added to every sheet
    report: dict

    @property
    def p(self) -> int:
        return len(self.cuts)

    def _sheet_value(self, i, z, side):
        cut = self.cuts[i]
        return cut.value(cut.u(z, side))

    def log_S(self, sheet: int, z, side: int | None = None):
        """log S^(k)(z); z = inf is allowed. side is needed on cuts of that sheet."""
        if z is math.inf or (isinstance(z, float) and math.isinf(z)):
            vals = [c.value(np.zeros(1, dtype=complex))[0] for c in self.cuts]
        else:
            z = np.asarray(z, dtype=complex)
            if sheet == 0:
                vals = [self._sheet_value(i, z, side) for i in range(self.p)]
            else:
                # sheet i only has a cut on support i; elsewhere it is analytic
                vals = [self._sheet_value(sheet - 1, z, side)]
        if sheet == 0:
            out = -sum(vals) + self.shift
        else:
            out = vals[0] + self.shift
        return complex(out) if np.ndim(out) == 0 else out

    def log_S_mp(self, sheet: int, z) -> mp.mpc:
        """log S^(k)(z) at the current mpmath precision; z off the cuts or inf."""
        if z is math.inf:
            us = [mp.mpf(0)] * self.p
        else:
            us = [c.u_mp(z) if (sheet == 0 or k == sheet - 1) else None for k, c in enumerate(self.cuts)]
        if sheet == 0:
            return -mp.fsum(c.value_mp(u) for c, u in zip(self.cuts, us)) + mp.mpc(self.shift)
        return self.cuts[sheet - 1].value_mp(us[sheet - 1]) + mp.mpc(self.shift)

    def to_dict(self) -> dict:
        return {"cuts": [c.to_dict() for c in self.cuts], "shift": [self.shift.real, self.shift.imag], "report": self.report}

    @classmethod
    def from_dict(cls, d) -> "SzegoEvaluator":
        return cls(tuple(CutData.from_dict(c) for c in d["cuts"]), complex(*d["shift"]), dict(d.get("report", {})))

    def S(self, sheet: int, z, side: int | None = None):
        return np.exp(self.log_S(sheet, z, side))

    def at_infinity(self, sheet: int = 0) -> complex:
        return complex(np.exp(self.log_S(sheet, math.inf)))


def _cut_terms(w: WeightSpec, support):
    """Singular part of -lambda on a support, mapped to its unit variable."""
    a, b = support

    def to_t(x):
        if x == a:
            return -1.0
        if x == b:
            return 1.0
        return (2 * x - (a + b)) / (b - a)

    logs = [(0.5, -1.0), (0.5, 1.0)]
    jumps = []
    for sp in w.singular:
        if sp.exponent != 0:
            logs.append((float(sp.exponent), to_t(sp.position)))
    merged: dict = {}
    for g, t0 in logs:
        merged[t0] = merged.get(t0, 0.0) + g
    logs = [(g, t0) for t0, g in merged.items() if g != 0]
    for sp in w.interior:
        beta = complex(sp.jump)
        if beta != 1:
            jumps.append((cmath.log(beta), to_t(sp.position)))
    return tuple(logs), tuple(jumps)


def _smooth_data(w: WeightSpec, xs):
    return log_regular(w, xs) + 0.5j * math.pi


def _chop(coeffs, rel: float = 1e-15):
    """Zero Chebyshev coefficients below rel * max, so exactly smooth data stays exact."""
    c = np.array(coeffs, dtype=complex)
    scale = np.max(np.abs(c)) if len(c) else 0.0
    c[np.abs(c) <= rel * scale] = 0
    return c


def _dct_matrix(N):
    return np.column_stack([cheb_coefficients(col) for col in np.eye(N)])


def solve_szego(sys: AngelescoSystem, sol: EquilibriumSolution, N: int = DEFAULT_MODES, tol: float = CERT_TOL, certify: bool = True) -> SzegoEvaluator:
    p = sys.p
    if sol.p != p:
        raise ValueError("equilibrium solution and system differ in the number of components")
    supports = sol.supports
    t = cheb_nodes(N)
    xs = [0.5 * (a + b) + 0.5 * (b - a) * t for a, b in supports]
    terms = [_cut_terms(w, s) for w, s in zip(sys.components, supports)]
    proto = [CutData(s, np.zeros(N, complex), np.zeros(N, complex), lg, jp) for s, (lg, jp) in zip(supports, terms)]
    Cm = _dct_matrix(N)
    kk = np.arange(N)
    A = np.eye(p * N, dtype=complex)
    rhs = np.concatenate([_smooth_data(w, x) for w, x in zip(sys.components, xs)]).astype(complex)
    for i in range(p):
        for j in range(p):
            if i == j:
                continue
            u = proto[j].u(xs[i])
            U = 0.5 * u[:, None] ** kk[None, :]
            A[i * N : (i + 1) * N, j * N : (j + 1) * N] = U @ Cm
            rhs[i * N : (i + 1) * N] -= proto[j].singular_image(u)
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > 1e12:
        raise SzegoError(f"collocation system is singular (condition number {cond:.3e})")
    D = np.linalg.solve(A, rhs)
    cuts = tuple(
        CutData(supports[i], D[i * N : (i + 1) * N], _chop(cheb_coefficients(D[i * N : (i + 1) * N])), *terms[i]) for i in range(p)
    )
    # pick the (p+1)-th root of unity that makes arg S^(0)(inf) closest to 0
    raw = SzegoEvaluator(cuts, 0j, {})
    l0 = raw.log_S(0, math.inf)
    j = round(l0.imag * (p + 1) / (2 * math.pi))
    shift = 2j * math.pi * j / (p + 1)
    ev = SzegoEvaluator(cuts, shift, {})
    report = certification_report(ev, sys)
    report["modes"] = N
    report["condition_number"] = float(cond)
    ev = SzegoEvaluator(cuts, shift, report)
    if certify and (report["jump_residual"] > tol or report["product_residual"] > 1e-10):
        raise SzegoError(f"certification failed: jump {report['jump_residual']:.3e}, product {report['product_residual']:.3e}")
    return ev


def _probe_midpoints(sys_w: WeightSpec, support, N, band=0.02):
    a, b = support
    th = np.arange(1, N) * math.pi / N
    x = 0.5 * (a + b) - 0.5 * (b - a) * np.cos(th)
    width = band * (b - a)
    keep = (x - a > width) & (b - x > width)
    for sp in sys_w.singular:
        keep &= np.abs(x - sp.position) > width
    return x[keep]


def jump_residual(ev: SzegoEvaluator, sys: AngelescoSystem, i: int, xs) -> float:
    """max relative |S^(i)_+- - S^(0)_-+ rho_i w_{i+}| over xs on support i."""
    w = sys.components[i]
    wf = BranchFunctionW(i, ev.cuts[i].support)
    xs = np.asarray(xs, dtype=float)
    log_target = np.log(weight_values(w, xs)) + np.log(w_eval(wf, xs + 0j, side=1))
    worst = 0.0
    for side in (1, -1):
        li = ev.log_S(i + 1, xs + 0j, side)
        l0 = ev.log_S(0, xs + 0j, -side)
        d = li - l0 - log_target
        worst = max(worst, float(np.max(np.abs(np.expm1(d)))))
    return worst


def certification_report(ev: SzegoEvaluator, sys: AngelescoSystem, n_points: int = 16) -> dict:
    N = len(ev.cuts[0].values)
    jumps = [jump_residual(ev, sys, i, _probe_midpoints(sys.components[i], c.support, N)) for i, c in enumerate(ev.cuts)]
    lo = min(c.support[0] for c in ev.cuts)
    hi = max(c.support[1] for c in ev.cuts)
    rad = 0.5 * (hi - lo)
    ang = 2 * math.pi * (np.arange(n_points) + 0.37) / n_points
    zs = 0.5 * (lo + hi) + rad * (1.0 + 0.5 * np.sin(3 * ang)) * np.exp(1j * ang)
    prod = 0.0
    for z in zs:
        tot = sum(ev.log_S(k, z) for k in range(ev.p + 1))
        prod = max(prod, abs(complex(tot.real, math.remainder(tot.imag, 2 * math.pi))))
    return {"jump_residual": max(jumps), "jump_residual_per_cut": jumps, "product_residual": prod}


def mean_value_defect(ev: SzegoEvaluator, z0: complex, radius: float, n: int = 64, sheet: int = 0) -> float:
    """|mean of log S on a circle - value at the centre| (holomorphy probe)."""
    t = 2 * math.pi * np.arange(n) / n
    vals = ev.log_S(sheet, z0 + radius * np.exp(1j * t))
    return abs(np.mean(vals) - ev.log_S(sheet, z0))


def fit_exponent(ev: SzegoEvaluator, x0: float, direction: complex, sheet: int = 0, decades=(-8.0, -6.0), n: int = 9) -> float:
    """Least-squares slope of log|S^(k)(x0 + d*direction)| against log d."""
    ds = np.logspace(decades[0], decades[1], n)
    zs = x0 + ds * direction
    ls = np.real(ev.log_S(sheet, zs))
    return float(np.polyfit(np.log(ds), ls, 1)[0])


def corner_exponent(alpha: float) -> float:
    return -(2 * alpha + 1) / 4


def middle_exponent(alpha: float, beta: complex, half_plane: int) -> float:
    """|S^(0)| ~ |z - x0|^e near an interior singular point, for sign(Im z) = half_plane.

    The jump term contributes +arg(beta)/(2 pi) from above and the opposite from below.
    """
    return -(alpha - half_plane * cmath.phase(beta) / math.pi) / 2


def local_singularity_model(lambda_kind: int, params: dict, z: complex, sheet: int = 0) -> complex:
    """Leading local term of the solution for a singular datum lambda near x0.

    kind 1, lambda = alpha log|x - x0|: +(alpha/2) log(z - x0) on sheet 0, the negative on sheet i.
    kind 2, lambda = log(beta) 1_{[x0, b]}: -+(log beta / 2 pi i) log(z - x0) on sheet 0 for
    +-Im z > 0, opposite sign on sheet i.
    """
    z = complex(z)
    x0 = float(params["x0"])
    lg = cmath.log(z - x0)
    sgn = 1 if sheet == 0 else -1
    if lambda_kind == 1:
        return sgn * 0.5 * float(params["alpha"]) * lg
    if lambda_kind == 2:
        if z.imag == 0:
            raise BranchError("kind 2 model needs Im z != 0")
        hp = 1 if z.imag > 0 else -1
        return -sgn * hp * cmath.log(complex(params["beta"])) / (2j * math.pi) * lg
    raise ValueError(f"unknown singular datum kind {lambda_kind}")


# ---------------------------------------------------------------------------
# independent single-interval oracle (direct quadrature of the classical formula)


class P1Oracle:
    """L(z) = -(w(z) / 2 pi) int_0^pi f(m + r cos t) / (m + r cos t - z) dt with f = log(rho w_+)."""

    def __init__(self, w: WeightSpec, branch_points, dps: int = 30):
        self.w = w
        self.a, self.b = (float(v) for v in branch_points)
        self.m = 0.5 * (self.a + self.b)
        self.r = 0.5 * (self.b - self.a)
        self.dps = dps
        cuts = []
        for sp in w.singular:
            if self.a < sp.position < self.b:
                cuts.append(float(mp.acos((sp.position - self.m) / self.r)))
        self.breaks = [mp.mpf(0)] + sorted(mp.mpf(c) for c in cuts) + [mp.pi]
        with mp.workdps(dps):
            inf_val = self._integral(self.f) / (2 * mp.pi)
        p = 1
        j = round(float(mp.im(-inf_val)) * (p + 1) / (2 * math.pi))
        self.shift = 2j * math.pi * j / (p + 1)

    def f(self, t):
        """log(rho w_+) at x = m + r cos t, endpoint distances via half angles."""
        w = self.w
        x = self.m + self.r * mp.cos(t)
        da = 2 * self.r * mp.cos(t / 2) ** 2  # x - a
        db = 2 * self.r * mp.sin(t / 2) ** 2  # b - x
        reg = w.regular
        if reg.kind == "exp-polynomial":
            acc = mp.mpf(0)
            for c in reversed(reg.coefficients):
                acc = acc * x + mp.mpc(c)
            val = acc
        else:
            val = mp.log(reg.mp_value(x))
        for sp in w.singular:
            if sp.exponent == 0:
                continue
            if sp.position == self.a:
                d = da
            elif sp.position == self.b:
                d = db
            else:
                d = abs(x - sp.position)
            val += sp.exponent * mp.log(d)
        for sp in w.interior:
            if x > sp.position:
                val += mp.log(mp.mpc(sp.jump))
        return val + (mp.log(da) + mp.log(db)) / 2 + 1j * mp.pi / 2

    def _integral(self, g):
        return mp.quad(g, self.breaks)

    def _w(self, z):
        s = (z - self.m) / self.r
        return self.r * mp.sqrt(s - 1) * mp.sqrt(s + 1)

    def L(self, z) -> complex:
        """log S^(1)(z) off the cut."""
        with mp.workdps(self.dps):
            z = mp.mpc(z)
            x = lambda t: self.m + self.r * mp.cos(t)
            val = self._integral(lambda t: self.f(t) / (x(t) - z))
            return complex(-self._w(z) * val / (2 * mp.pi)) + self.shift

    def L_boundary(self, x: float, side: int) -> complex:
        """Plemelj limit of log S^(1) on the open cut."""
        with mp.workdps(self.dps):
            x = mp.mpf(x)
            tx = mp.acos((x - self.m) / self.r)
            fx = self.f(tx)
            xt = lambda t: self.m + self.r * mp.cos(t)
            pts = sorted(set(self.breaks + [tx]))

            def g(t):
                d = xt(t) - x
                if d == 0:
                    return mp.mpf(0)
                return (self.f(t) - fx) / d

            pv = -mp.quad(g, pts) / (2 * mp.pi)
            wplus = 1j * self.r * mp.sin(tx)
            return complex(side * wplus * pv + fx / 2) + self.shift

    def log_S(self, sheet: int, z, side: int | None = None) -> complex:
        z = complex(z)
        on_cut = z.imag == 0 and self.a <= z.real <= self.b
        if on_cut:
            if side is None:
                raise BranchError("point on the cut without a side flag")
            val = self.L_boundary(z.real, side)
        elif math.isinf(abs(z)):
            with mp.workdps(self.dps):
                val = complex(self._integral(self.f) / (2 * mp.pi)) + self.shift
        else:
            val = self.L(z)
        # the common shift is carried by both sheets
        return val if sheet == 1 else -val + 2 * self.shift


def p1_oracle(w: WeightSpec, branch_points, dps: int = 30) -> P1Oracle:
    return P1Oracle(w, branch_points, dps)
