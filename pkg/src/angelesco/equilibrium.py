"""Vector equilibrium problem for Angelesco interaction.

Each component is stored on its support [a*, b*] (x = m + r s) as

    density(x) = B(s) / (pi r sqrt(1 - s^2)),   B = sum_k a_k T_k,  a_0 = mass,

which makes potentials, complex logarithmic integrals and Cauchy transforms
closed-form series in 1/phi(s). The scalar problem with external field Q
has a_k = (U_{k-1}-coefficient of -r Q'(x(s))) for k >= 1; a soft edge is an
endpoint where B vanishes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import mpmath as mp
import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.linalg import lu_factor, lu_solve
from scipy.optimize import brentq

from .weights import BranchError
from .quadrature import cheb_coefficients, cheb_nodes, joukowski, log_phi, power_series, to_unit

HARD, SOFT = "hard", "soft"


class EquilibriumError(RuntimeError):
    """Endpoint bracketing or sweep convergence failure."""


@dataclass(frozen=True)
class RayVector:
    entries: tuple

    def __post_init__(self):
        e = tuple(float(v) for v in self.entries)
        object.__setattr__(self, "entries", e)
        if len(e) > 1 and not all(0 < v < 1 for v in e):
            raise ValueError("ray entries must lie in (0, 1)")
        if abs(sum(e) - 1) > 1e-12:
            raise ValueError("ray entries must sum to 1")

    @classmethod
    def from_index(cls, n) -> "RayVector":
        n = tuple(int(v) for v in n)
        tot = sum(n)
        return cls(tuple(v / tot for v in n))

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, i):
        return self.entries[i]


@dataclass(frozen=True, eq=False)
class ChebDensity:
    support: tuple
    edge_class: tuple
    coefficients: np.ndarray  # analytic factor in Chebyshev form on the support
    mass: float
    bracket: np.ndarray  # a_k of B = sum a_k T_k

    @classmethod
    def from_bracket(cls, support, bracket, edge_class=(HARD, HARD)) -> "ChebDensity":
        a, b = support
        r = 0.5 * (b - a)
        br = np.asarray(bracket, dtype=float)
        # analytic factor: B divided by the soft-edge zeros, exactly in Chebyshev arithmetic
        q = br.copy()
        if edge_class[1] == SOFT:
            q = C.chebdiv(q, [1.0, -1.0])[0]  # / (1 - s)
        if edge_class[0] == SOFT:
            q = C.chebdiv(q, [1.0, 1.0])[0]  # / (1 + s)
        nsoft = sum(e == SOFT for e in edge_class)
        coeffs = q / (math.pi * r**nsoft)
        return cls((float(a), float(b)), tuple(edge_class), coeffs, float(br[0]), br)

    @property
    def center(self) -> float:
        return 0.5 * (self.support[0] + self.support[1])

    @property
    def radius(self) -> float:
        return 0.5 * (self.support[1] - self.support[0])

    def density(self, x):
        """Density at points of the closed support (zero outside)."""
        x = np.asarray(x, dtype=float)
        a, b = self.support
        inside = (x > a) & (x < b)
        xc = np.clip(x, a, b)
        s = to_unit(xc, self.support)
        fac = C.chebval(s, self.coefficients)
        eL = -0.5 if self.edge_class[0] == HARD else 0.5
        eR = -0.5 if self.edge_class[1] == HARD else 0.5
        with np.errstate(divide="ignore", invalid="ignore"):
            val = fac * np.abs(xc - a) ** eL * np.abs(b - xc) ** eR
        return np.where(inside, val, 0.0)

    def _series(self, z, side):
        s = to_unit(np.asarray(z, dtype=complex), self.support)
        phi, root = joukowski(s, side)
        return s, phi, root, 1.0 / phi

    def potential(self, z, side: int | None = None):
        """V(z) = -int log|z - t| d mu(t); continuous across the support."""
        s = to_unit(np.asarray(z, dtype=complex), self.support)
        on_cut = (s.imag == 0) & (np.abs(s.real) <= 1)
        sd = side if side is not None else (1 if np.any(on_cut) else None)
        _, phi, _, u = self._series(z, sd)
        a = self.bracket
        k = np.arange(1, len(a))
        tail = power_series(np.concatenate(([0.0], a[1:] / k)), u).real
        return -self.mass * math.log(self.radius) - self.mass * np.log(np.abs(phi) / 2) + tail

    def log_integral(self, z, side: int | None = None):
        """int Log(z - t) d mu(t) with principal logarithms."""
        s = to_unit(np.asarray(z, dtype=complex), self.support)
        lp = log_phi(s, side)
        u = np.exp(-lp)
        a = self.bracket
        k = np.arange(1, len(a))
        tail = power_series(np.concatenate(([0.0], a[1:] / k)), u)
        return self.mass * math.log(self.radius) + self.mass * (lp - math.log(2)) - tail

    def log_integral_mp(self, z, side: int | None = None):
        """log_integral at the current mpmath precision (z off the support)."""
        a, b = (mp.mpf(v) for v in self.support)
        r = (b - a) / 2
        s = (mp.mpc(z) - (a + b) / 2) / r
        if s.imag == 0 and abs(s.real) <= 1:
            raise BranchError("point on the support; log_integral_mp needs an off-cut point")
        phi = s + mp.sqrt(s - 1) * mp.sqrt(s + 1)
        if s.imag == 0 and s.real < -1:
            if side is None:
                raise BranchError("point on (-inf, a) without a side flag")
            lp = mp.log(abs(phi)) + side * 1j * mp.pi
        else:
            lp = mp.log(phi)
        u = 1 / phi
        tail = mp.mpc(0)
        for k in range(len(self.bracket) - 1, 0, -1):
            tail = (tail + mp.mpf(float(self.bracket[k])) / k) * u
        mass = mp.mpf(float(self.mass))
        return mass * mp.log(r) + mass * (lp - mp.log(2)) - tail

    def cauchy(self, z, side: int | None = None):
        """h(z) = int d mu(t) / (z - t)."""
        _, _, root, u = self._series(z, side)
        return power_series(self.bracket, u) / (self.radius * root)

    def field_derivative(self, x):
        """d/dx V(x) at real x off the support."""
        return -np.real(self.cauchy(np.asarray(x, dtype=complex)))

    def scaled(self, factor: float) -> "ChebDensity":
        return ChebDensity(self.support, self.edge_class, self.coefficients * factor, self.mass * factor, self.bracket * factor)

    def reflected(self) -> "ChebDensity":
        """Image under x -> -x."""
        a, b = self.support
        sign = (-1.0) ** np.arange(len(self.bracket))
        return ChebDensity.from_bracket((-b, -a), self.bracket * sign, self.edge_class[::-1])

    def to_dict(self) -> dict:
        return {"support": list(self.support), "edge_class": list(self.edge_class), "bracket": [float(v) for v in self.bracket]}

    @classmethod
    def from_dict(cls, d) -> "ChebDensity":
        return cls.from_bracket(tuple(d["support"]), np.array(d["bracket"], dtype=float), tuple(d["edge_class"]))


def arcsine(interval, mass: float = 1.0) -> ChebDensity:
    return ChebDensity.from_bracket(interval, np.array([float(mass)]), (HARD, HARD))


@dataclass(frozen=True)
class ExternalField:
    """Sum of weighted potentials of fixed densities: Q = sum_j w_j V^{mu_j}."""

    terms: tuple = ()

    def value(self, x):
        x = np.asarray(x, dtype=complex)
        out = np.zeros(x.shape)
        for wgt, dens in self.terms:
            out = out + wgt * dens.potential(x)
        return out

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        for wgt, dens in self.terms:
            out = out + wgt * dens.field_derivative(x)
        return out


@dataclass(frozen=True)
class FunctionField:
    """External field given by callables (value, derivative), for scalar experiments."""

    value_fn: object
    derivative_fn: object

    def value(self, x):
        return np.asarray(self.value_fn(np.asarray(x, dtype=float)), dtype=float)

    def derivative(self, x):
        return np.asarray(self.derivative_fn(np.asarray(x, dtype=float)), dtype=float)


@dataclass(frozen=True)
class EquilibriumOptions:
    n_modes: int = 256
    tol: float = 1e-10
    max_sweeps: int = 200
    damping: float = 1.0
    probe_points: int = 129


def _bracket(support, mass, field, n):
    a, b = support
    r = 0.5 * (b - a)
    s = cheb_nodes(n)
    g = -r * field.derivative(0.5 * (a + b) + r * s)
    t = np.zeros(n + 2)
    t[:n] = cheb_coefficients(g)
    ucoef = 0.5 * (t[:n] - t[2 : n + 2])
    ucoef[0] = t[0] - 0.5 * t[2]
    return np.concatenate(([mass], ucoef))


def _ends(br):
    sign = (-1.0) ** np.arange(len(br))
    return float(np.sum(br * sign)), float(np.sum(br))


def single_weighted_equilibrium(interval, mass: float, field, opts: EquilibriumOptions | None = None) -> ChebDensity:
    """Equilibrium of given mass on [a, b] in the external field Q (value/derivative)."""
    opts = opts or EquilibriumOptions()
    n = opts.n_modes
    a, b = (float(v) for v in interval)
    length = b - a
    floor = 1e-9 * length
    xtol = 1e-15 * max(1.0, abs(a), abs(b))

    def bL(lo, hi):
        return _ends(_bracket((lo, hi), mass, field, n))[0] / mass

    def bR(lo, hi):
        return _ends(_bracket((lo, hi), mass, field, n))[1] / mass

    def left_end(hi):
        if bL(a, hi) >= 0:
            return a
        top = hi - floor
        if bL(top, hi) <= 0:
            raise EquilibriumError(f"cannot bracket the left soft edge on [{a}, {hi}]")
        return brentq(lambda lo: bL(lo, hi), a, top, xtol=xtol, rtol=1e-15)

    def right_value(hi):
        return bR(left_end(hi), hi)

    if right_value(b) >= 0:
        hi = b
    else:
        start = a + floor
        if right_value(start) <= 0:
            raise EquilibriumError(f"cannot bracket the right soft edge on [{a}, {b}]")
        hi = brentq(right_value, start, b, xtol=xtol, rtol=1e-15)
    lo = left_end(hi)
    edge = (SOFT if lo > a else HARD, SOFT if hi < b else HARD)
    # a soft edge is an exact zero of B; remove the root-finding residue
    br = _project_soft(_bracket((lo, hi), mass, field, n), edge)
    return ChebDensity.from_bracket((lo, hi), br, edge)


def _project_soft(br, edge):
    """Enforce B(+-1) = 0 at soft edges by adjusting the two highest modes."""
    br = br.copy()
    k = len(br)
    if edge == (HARD, HARD):
        return br
    # solve for corrections d_{k-2}, d_{k-1} with minimal size
    rows = []
    rhs = []
    bl, brr = _ends(br)
    if edge[0] == SOFT:
        rows.append([(-1.0) ** (k - 2), (-1.0) ** (k - 1)])
        rhs.append(-bl)
    if edge[1] == SOFT:
        rows.append([1.0, 1.0])
        rhs.append(-brr)
    sol = np.linalg.lstsq(np.array(rows), np.array(rhs), rcond=None)[0]
    br[k - 2 :] += sol
    return br


def frostman_constant(dens: ChebDensity, field) -> float:
    """V^mu + Q on the support (evaluated at the support midpoint)."""
    x = np.array([dens.center])
    return float(dens.potential(x + 0j, side=1)[0] + field.value(x)[0])


@dataclass(frozen=True, eq=False)
class EquilibriumSolution:
    intervals: tuple
    c: tuple
    densities: tuple
    ell: tuple
    pushing: tuple
    frostman_residual: float
    sweeps: int = 0

    @property
    def p(self) -> int:
        return len(self.densities)

    @property
    def supports(self) -> list:
        return [d.support for d in self.densities]

    def total_potential(self, z):
        z = np.asarray(z, dtype=complex)
        return sum(d.potential(z) for d in self.densities)

    def combined_potential(self, i: int, z):
        """W_i = V^{omega_i} + V^{omega} = 2 V^{omega_i} + sum_{j != i} V^{omega_j}."""
        z = np.asarray(z, dtype=complex)
        return self.densities[i].potential(z) + self.total_potential(z)

    def to_dict(self) -> dict:
        return {
            "intervals": [list(iv) for iv in self.intervals],
            "c": list(self.c),
            "densities": [d.to_dict() for d in self.densities],
            "ell": list(self.ell),
            "pushing": [list(pp) for pp in self.pushing],
            "frostman_residual": self.frostman_residual,
            "sweeps": self.sweeps,
        }

    @classmethod
    def from_dict(cls, d) -> "EquilibriumSolution":
        return cls(
            tuple(tuple(iv) for iv in d["intervals"]),
            tuple(d["c"]),
            tuple(ChebDensity.from_dict(x) for x in d["densities"]),
            tuple(d["ell"]),
            tuple(tuple(pp) for pp in d["pushing"]),
            d["frostman_residual"],
            d.get("sweeps", 0),
        )


def _probe_points(intervals, n):
    return np.concatenate([0.5 * (a + b) + 0.5 * (b - a) * cheb_nodes(n) for a, b in intervals])


def _solution_from(intervals, c, dens, sweeps, opts) -> EquilibriumSolution:
    p = len(dens)
    ell, push = [], []
    for i in range(p):
        a, b = intervals[i]
        d = dens[i]
        xs = d.center + d.radius * cheb_nodes(opts.probe_points)
        w = d.potential(xs + 0j, side=1) + sum(dens[j].potential(xs + 0j, side=1) for j in range(p))
        ell.append(float(np.mean(w)))
        push.append((d.support[0] > a, d.support[1] < b))
    sol = EquilibriumSolution(tuple(tuple(iv) for iv in intervals), tuple(c), tuple(dens), tuple(ell), tuple(push), 0.0, sweeps)
    res = max(r["support_sup"] for r in frostman_residual(sol, intervals, c, opts.probe_points))
    return EquilibriumSolution(sol.intervals, sol.c, sol.densities, sol.ell, sol.pushing, res, sweeps)


def solve_vector_equilibrium(intervals, c, opts: EquilibriumOptions | None = None) -> EquilibriumSolution:
    """Gauss-Seidel sweeps over components until potentials stop changing."""
    opts = opts or EquilibriumOptions()
    intervals = [tuple(float(v) for v in iv) for iv in intervals]
    cvec = RayVector(c.entries if isinstance(c, RayVector) else tuple(c))
    p = len(intervals)
    if len(cvec) != p:
        raise ValueError("ray vector length differs from the number of intervals")
    if p == 1:
        return _solution_from(intervals, cvec.entries, [arcsine(intervals[0], 1.0)], 0, opts)
    dens = [arcsine(intervals[i], cvec[i]) for i in range(p)]
    used_fields: list = [None] * p
    probes = _probe_points(intervals, opts.probe_points) + 0j
    for sweep in range(1, opts.max_sweeps + 1):
        change = 0.0
        for i in range(p):
            terms = tuple((0.5, dens[j]) for j in range(p) if j != i)
            if opts.damping != 1.0 and used_fields[i] is not None:
                terms = tuple((opts.damping * wgt, d) for wgt, d in terms) + tuple(
                    ((1 - opts.damping) * wgt, d) for wgt, d in used_fields[i].terms
                )
            fld = ExternalField(terms)
            new = single_weighted_equilibrium(intervals[i], cvec[i], fld, opts)
            used_fields[i] = fld
            change = max(change, float(np.max(np.abs(new.potential(probes) - dens[i].potential(probes)))))
            dens[i] = new
        if change < opts.tol:
            return _solution_from(intervals, cvec.entries, dens, sweep, opts)
    raise EquilibriumError(f"Gauss-Seidel sweeps did not converge in {opts.max_sweeps} sweeps (last change {change:.3e})")


def frostman_residual(sol: EquilibriumSolution, intervals=None, c=None, probe_points: int = 129) -> list[dict]:
    """Per component: sup |W - ell| on the support and max(ell - W) on the uncovered part."""
    intervals = intervals or sol.intervals
    out = []
    for i, d in enumerate(sol.densities):
        a, b = intervals[i]
        xs = d.center + d.radius * cheb_nodes(probe_points)
        w = _w_real(sol, i, xs)
        sup = float(np.max(np.abs(w - sol.ell[i])))
        unc = []
        lo, hi = d.support
        t = np.linspace(0.02, 1.0, 65)
        if lo > a:
            unc.append(lo - (lo - a) * t)
        if hi < b:
            unc.append(hi + (b - hi) * t)
        if unc:
            xu = np.concatenate(unc)
            umax = float(np.max(sol.ell[i] - _w_real(sol, i, xu)))
        else:
            umax = None
        out.append({"component": i, "support_sup": sup, "uncovered_max": umax, "mass_error": abs(d.mass - sol.c[i])})
    return out


def _w_real(sol, i, xs):
    xs = np.asarray(xs, dtype=complex)
    p = sol.p
    return sol.densities[i].potential(xs, side=1) + sum(sol.densities[j].potential(xs, side=1) for j in range(p))


@dataclass(frozen=True, eq=False)
class DivergenceMap:
    xs: np.ndarray
    ys: np.ndarray
    u: tuple  # per component, ell_i - W_i on the grid (rows follow ys)
    labels: tuple  # +1 in D^+, -1 in D^-, 0 in the near-zero band
    empty: tuple  # per component: True when D^- has no grid node


def divergence_regions(sol: EquilibriumSolution, grid, band: float = 1e-8) -> DivergenceMap:
    xs, ys = (np.asarray(g, dtype=float) for g in grid)
    Z = xs[None, :] + 1j * ys[:, None]
    us, labels, empty = [], [], []
    for i in range(sol.p):
        u = sol.ell[i] - _w_real(sol, i, Z)
        lab = np.where(u > band, 1, np.where(u < -band, -1, 0))
        us.append(u)
        labels.append(lab)
        empty.append(not np.any(lab == -1))
    return DivergenceMap(xs, ys, tuple(us), tuple(labels), tuple(empty))


def divergence_touches(sol: EquilibriumSolution, i: int, endpoint: float, radius: float = 0.02, n: int = 64, band: float = 1e-10) -> bool:
    """True when ell_i - W_i < 0 somewhere in a small disc around the support endpoint."""
    t = np.linspace(0, 2 * np.pi, n, endpoint=False)
    rr = np.array([0.25, 0.5, 1.0]) * radius
    z = endpoint + (rr[:, None] * np.exp(1j * t)[None, :]).ravel()
    z = z[np.abs(z.imag) > 1e-14]
    u = sol.ell[i] - _w_real(sol, i, z)
    return bool(np.any(u < -band))


# ---------------------------------------------------------------------------
# Discretised energy minimisation (independent oracle)


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    nodes: tuple  # per component cell midpoints
    masses: tuple  # per component node masses
    widths: tuple

    def potential(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape)
        for x, m in zip(self.nodes, self.masses):
            out = out - np.sum(m[None, :] * np.log(np.abs(z.reshape(-1, 1) - x[None, :])), axis=1).reshape(z.shape)
        return out

    def component_potential(self, i, z):
        z = np.asarray(z, dtype=complex)
        return -np.sum(self.masses[i][None, :] * np.log(np.abs(z.reshape(-1, 1) - self.nodes[i][None, :])), axis=1).reshape(z.shape)

    def supports(self, threshold: float = 1e-12):
        out = []
        for x, m, h in zip(self.nodes, self.masses, self.widths):
            idx = np.nonzero(m > threshold * np.max(m))[0]
            out.append((x[idx[0]] - h / 2, x[idx[-1]] + h / 2))
        return out


def qp_oracle(intervals, c, gridN: int = 400, max_iter: int = 10000) -> DiscreteMeasure:
    """Minimise the discretised Angelesco energy over nonnegative cell masses.

    Cells are uniform; the kernel uses midpoint distances off the diagonal and
    the exact self-energy of a uniform cell, -log h + 3/2, on it. The quadratic
    program is solved by a Lawson-Hanson style active-set iteration with one
    mass constraint per component.
    """
    intervals = [tuple(float(v) for v in iv) for iv in intervals]
    c = list(c.entries if isinstance(c, RayVector) else c)
    p = len(intervals)
    nodes, widths = [], []
    for a, b in intervals:
        h = (b - a) / gridN
        nodes.append(a + h * (np.arange(gridN) + 0.5))
        widths.append(h)
    x = np.concatenate(nodes)
    comp = np.repeat(np.arange(p), gridN)
    hh = np.repeat(widths, gridN)
    with np.errstate(divide="ignore"):
        K = -np.log(np.abs(x[:, None] - x[None, :]))
    np.fill_diagonal(K, -np.log(hh) + 1.5)
    M = K * np.where(comp[:, None] == comp[None, :], 2.0, 1.0)
    n = len(x)
    E = np.zeros((p, n))
    E[comp, np.arange(n)] = 1.0
    cvec = np.array(c, dtype=float)

    def eq_qp(free):
        idx = np.nonzero(free)[0]
        Mf = M[np.ix_(idx, idx)]
        Ef = E[:, idx]
        kkt = np.block([[2 * Mf, -Ef.T], [Ef, np.zeros((p, p))]])
        rhs = np.concatenate((np.zeros(len(idx)), cvec))
        sol = lu_solve(lu_factor(kkt), rhs)
        full = np.zeros(n)
        full[idx] = sol[: len(idx)]
        return full, sol[len(idx) :]

    m = cvec[comp] / gridN
    free = np.ones(n, dtype=bool)
    for _ in range(max_iter):
        cand, lam = eq_qp(free)
        neg = free & (cand <= 0)
        if np.any(neg):
            ratios = m[neg] / (m[neg] - cand[neg])
            alpha = float(np.min(ratios))
            m = m + alpha * (cand - m)
            m[neg & (m <= 1e-15 * np.max(m))] = 0.0
            hit = np.argmin(np.where(neg, m / np.where(neg, m - cand + 1e-300, 1), np.inf))
            free &= m > 0
            free[hit] = False if m[hit] <= 1e-15 else free[hit]
            m[~free] = 0.0
            continue
        m = cand
        mu = 2 * M @ m - lam[comp]
        mu[free] = 0.0
        k = int(np.argmin(mu))
        if mu[k] >= -1e-12:
            break
        free[k] = True
    else:
        raise EquilibriumError("quadratic-program oracle did not converge")
    masses = tuple(m[comp == i] for i in range(p))
    return DiscreteMeasure(tuple(nodes), masses, tuple(widths))
