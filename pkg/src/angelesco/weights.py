"""Complex Jacobi-type weights with Fisher-Hartwig singularities.

A weight on [a, b] is

    rho(x) = rho_r(x) * prod_j |x - x_j|^alpha_j * prod_{j : x > x_j} beta_j

where rho_r is a non-vanishing polynomial or exp(polynomial), x_0 = a and
x_J = b. Scalars come in two flavours: numpy float/complex for double
precision work and mpmath numbers for the high-precision paths.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import mpmath as mp
import numpy as np


class WeightDomainError(ValueError):
    """Evaluation at a point where the weight is undefined."""


class BranchError(ValueError):
    """Evaluation of a continuation on one of its branch cuts."""


@dataclass(frozen=True)
class SingularPoint:
    position: float
    exponent: float = 0.0
    jump: complex = 1.0


@dataclass(frozen=True)
class RegularPart:
    """rho_r as a polynomial or exp(polynomial); coefficients in ascending powers."""

    kind: str = "polynomial"
    coefficients: tuple = (1.0,)

    def __post_init__(self):
        if self.kind not in ("polynomial", "exp-polynomial"):
            raise ValueError(f"unknown regular part kind {self.kind!r}")
        if len(self.coefficients) == 0:
            raise ValueError("regular part needs at least one coefficient")
        object.__setattr__(self, "coefficients", tuple(self.coefficients))

    @property
    def is_constant(self) -> bool:
        return all(c == 0 for c in self.coefficients[1:])

    @property
    def degree(self) -> int | None:
        """Polynomial degree, or None for exp-polynomials (not a polynomial)."""
        if self.kind == "exp-polynomial":
            return 0 if self.is_constant else None
        d = len(self.coefficients) - 1
        while d > 0 and self.coefficients[d] == 0:
            d -= 1
        return d

    def _poly(self, x):
        # Horner, works for numpy arrays and mpmath scalars alike
        acc = 0
        for c in reversed(self.coefficients):
            acc = acc * x + c
        return acc

    def _poly_mp(self, x):
        acc = mp.mpc(0)
        for c in reversed(self.coefficients):
            acc = acc * x + mp.mpc(c)
        return acc

    def __call__(self, x):
        x = np.asarray(x, dtype=complex)
        v = self._poly(x) + 0j
        return np.exp(v) if self.kind == "exp-polynomial" else v

    def mp_value(self, x):
        v = self._poly_mp(x)
        return mp.exp(v) if self.kind == "exp-polynomial" else v

    def derivative(self, x):
        x = np.asarray(x, dtype=complex)
        coeffs = self.coefficients
        d = 0j * x
        for k in range(len(coeffs) - 1, 0, -1):
            d = d * x + k * coeffs[k]
        if self.kind == "exp-polynomial":
            return d * self(x)
        return d


def chebyshev_points(n: int, a: float, b: float) -> np.ndarray:
    """Chebyshev points of the first kind on [a, b], increasing."""
    k = np.arange(n)
    t = -np.cos((2 * k + 1) * np.pi / (2 * n))
    return 0.5 * (a + b) + 0.5 * (b - a) * t


@dataclass(frozen=True)
class WeightSpec:
    interval: tuple
    regular: RegularPart = field(default_factory=RegularPart)
    singular: tuple = ()

    def __post_init__(self):
        a, b = (float(v) for v in self.interval)
        object.__setattr__(self, "interval", (a, b))
        sing = tuple(self.singular)
        if not sing:
            sing = (SingularPoint(a), SingularPoint(b))
        object.__setattr__(self, "singular", sing)
        if a < b:
            # non-vanishing check of the regular part (heuristic, on an enlarged grid)
            mid, half = 0.5 * (a + b), 0.525 * (b - a)
            grid = chebyshev_points(1024, mid - half, mid + half)
            vals = np.abs(self.regular(grid))
            scale = max(1.0, float(np.max(vals)))
            if not np.all(np.isfinite(vals)) or np.min(vals) <= 1e-12 * scale:
                raise ValueError("regular part vanishes near the interval")
            # the grid can step over an isolated real zero, so check roots too
            if self.regular.kind == "polynomial" and self.regular.degree:
                roots = np.roots(list(reversed(self.regular.coefficients[: self.regular.degree + 1])))
                near = (np.abs(roots.imag) < 1e-9 * (b - a)) & (np.abs(roots.real - mid) <= half)
                if np.any(near):
                    raise ValueError("regular part vanishes near the interval")

    @property
    def a(self) -> float:
        return self.interval[0]

    @property
    def b(self) -> float:
        return self.interval[1]

    @property
    def positions(self) -> np.ndarray:
        return np.array([s.position for s in self.singular], dtype=float)

    @property
    def exponents(self) -> np.ndarray:
        return np.array([s.exponent for s in self.singular], dtype=float)

    @property
    def interior(self) -> tuple:
        return self.singular[1:-1]

    @property
    def is_even(self) -> bool:
        """True when rho(-x) = rho(x) and the interval is symmetric about 0."""
        a, b = self.interval
        if a != -b:
            return False
        if any(complex(s.jump) != 1 for s in self.singular):
            return False
        pos = [s.position for s in self.singular]
        exps = [s.exponent for s in self.singular]
        if pos != [-p for p in reversed(pos)] or exps != list(reversed(exps)):
            return False
        return all(c == 0 for c in self.regular.coefficients[1::2])


@dataclass(frozen=True)
class AngelescoSystem:
    components: tuple

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))

    @property
    def p(self) -> int:
        return len(self.components)

    @property
    def intervals(self) -> list:
        return [w.interval for w in self.components]


def validate_system(sys: AngelescoSystem) -> list[str]:
    """One diagnostic string per violated invariant; empty when valid."""
    out = []
    if sys.p < 1:
        out.append("system has no components")
    for i, w in enumerate(sys.components):
        a, b = w.interval
        tag = f"component {i + 1}"
        if not a < b:
            out.append(f"{tag}: interval endpoints not increasing")
        pos = [s.position for s in w.singular]
        if any(q <= p for p, q in zip(pos, pos[1:])):
            out.append(f"{tag}: singular positions not strictly increasing")
        if pos and (pos[0] != a or pos[-1] != b):
            out.append(f"{tag}: singular points must start at a and end at b")
        for s in w.singular:
            if not s.exponent > -1:
                out.append(f"{tag}: exponent <= -1 at x={s.position}")
            beta = complex(s.jump)
            if s.position in (a, b):
                if beta != 1:
                    out.append(f"{tag}: jump at an endpoint must be 1 (x={s.position})")
            elif beta.imag == 0 and beta.real <= 0:
                out.append(f"{tag}: jump on the cut (-inf, 0] at x={s.position}")
    for i in range(sys.p - 1):
        if sys.components[i].b >= sys.components[i + 1].a:
            out.append(f"intervals overlap or are unsorted: components {i + 1} and {i + 2}")
    return out


def _jump_factor(w: WeightSpec, x: float) -> complex:
    f = 1 + 0j
    for s in w.interior:
        if x > s.position:
            f *= complex(s.jump)
    return f


def eval_weight(w: WeightSpec, x: float) -> complex:
    """rho(x) at a real point of the interval."""
    a, b = w.interval
    if not a <= x <= b:
        raise WeightDomainError(f"x={x} outside [{a}, {b}]")
    val = complex(w.regular(x))
    for s in w.singular:
        d = abs(x - s.position)
        if d == 0:
            if s.exponent < 0:
                raise WeightDomainError(f"x={x} is a singular point with negative exponent")
            if s.exponent > 0:
                return 0j
            continue
        if s.exponent != 0:
            val *= d ** s.exponent
    return val * _jump_factor(w, x)


def weight_values(w: WeightSpec, xs) -> np.ndarray:
    """Vectorised eval_weight for points strictly inside (a, b) away from singular points."""
    xs = np.asarray(xs, dtype=float)
    val = w.regular(xs).astype(complex)
    for s in w.singular:
        if s.exponent != 0:
            val = val * np.abs(xs - s.position) ** s.exponent
    for s in w.interior:
        beta = complex(s.jump)
        if beta != 1:
            val = np.where(xs > s.position, val * beta, val)
    return val


def weight_value_mp(w: WeightSpec, x):
    """eval_weight at working mpmath precision."""
    val = w.regular.mp_value(x)
    for s in w.singular:
        if s.exponent != 0:
            val *= mp.power(abs(x - mp.mpf(s.position)), mp.mpf(s.exponent))
    for s in w.interior:
        if x > s.position and complex(s.jump) != 1:
            val *= mp.mpc(s.jump)
    return val


def log_regular(w: WeightSpec, xs) -> np.ndarray:
    """A continuous branch of log rho_r along the interval, rooted at the principal value at a."""
    xs = np.asarray(xs, dtype=float)
    reg = w.regular
    if reg.kind == "exp-polynomial":
        return reg._poly(xs.astype(complex)) + 0j
    a, b = w.interval
    lo, hi = min(a, float(np.min(xs, initial=a))), max(b, float(np.max(xs, initial=b)))
    ref = np.linspace(lo, hi, 4097)
    ref_arg = np.unwrap(np.angle(reg(ref)))
    ref_arg -= 2 * np.pi * np.round((ref_arg[np.searchsorted(ref, a)] - np.angle(reg(a))) / (2 * np.pi))
    vals = reg(xs)
    base = np.log(vals)
    target = np.interp(xs, ref, ref_arg)
    return base + 2j * np.pi * np.round((target - base.imag) / (2 * np.pi))


def _side_cpow(u: complex, alpha: float) -> complex:
    if alpha == 0:
        return 1 + 0j
    return cmath.exp(alpha * cmath.log(u))


def continue_weight(w: WeightSpec, z: complex, split_index: int, side: int | None = None) -> complex:
    """Analytic continuation of rho off the interval around a split.

    Singular points with index j < split_index get the factor (z - x_j)^alpha_j
    (cut along (-inf, x_j]); the others get (x_j - z)^alpha_j (cut along
    [x_j, inf)). Real z on a cut needs side=+1 (limit from above) or -1.
    """
    z = complex(z)
    sing = w.singular
    if not 0 <= split_index <= len(sing):
        raise ValueError("split_index out of range")
    on_real = z.imag == 0
    val = complex(w.regular(z))
    for j, s in enumerate(sing):
        x = s.position
        if j < split_index:
            val *= complex(s.jump)
            u = z - x
            if on_real and u.real <= 0 and s.exponent != 0:
                if side is None:
                    raise BranchError(f"z={z} on the cut (-inf, {x}]")
                if u.real == 0 and s.exponent < 0:
                    raise BranchError(f"z={z} at a branch point")
                u = complex(u.real, math.copysign(0.0, side))
        else:
            u = x - z
            if on_real and u.real <= 0 and s.exponent != 0:
                if side is None:
                    raise BranchError(f"z={z} on the cut [{x}, inf)")
                if u.real == 0 and s.exponent < 0:
                    raise BranchError(f"z={z} at a branch point")
                u = complex(u.real, math.copysign(0.0, -side))
        val *= _side_cpow(u, s.exponent)
    return val
