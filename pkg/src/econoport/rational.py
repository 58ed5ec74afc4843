"""Real-coefficient polynomials and rational functions of the complex frequency s.

These are the carriers of every elasticity and parameter expression in the
package: element laws like ``V = (1/eps) s F``, behavioral-operator entries,
and policy transfer functions are all ratios of low-degree polynomials in
``s = sigma + i*omega`` (sigma: discount rate, 1/yr; omega: cycle frequency,
rad/yr).

Coefficients are double-precision floats, ascending degree, with the zero
polynomial represented by an empty coefficient tuple.  Rational functions are
kept normalized: monic denominator, common roots cancelled by a thresholded
Euclidean GCD.  Equality is cross-multiplication equality within tolerance.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

# Relative tolerance for common-root cancellation in normalization.
CANCEL_TOL = 1e-9
# Relative tolerance for cross-multiplication equality tests.
EQ_TOL = 1e-9
# rf evaluation refuses points where |den(s)| < POLE_FLOOR * (1 + |s|^deg).
POLE_FLOOR = 1e-12
# Coefficients below ARITH_EPS of a rational function's joint num/den scale
# are cancellation residue and are zapped at construction.
ARITH_EPS = 1e-12


class RationalError(ValueError):
    """Ill-posed rational-function operation (division by zero, singular matrix)."""


class PoleEvaluationError(RationalError):
    """Evaluation was requested too close to a pole."""

    def __init__(self, s: complex, den_mag: float):
        self.s = s
        self.den_mag = den_mag
        super().__init__(f"evaluation at s={s} is within the pole floor (|den|={den_mag:.3e})")


def _trim(coeffs: Sequence[float], tol: float = 0.0, scale: float | None = None) -> tuple[float, ...]:
    """Drop trailing coefficients with magnitude <= tol*scale."""
    c = list(float(x) for x in coeffs)
    if scale is None:
        scale = max((abs(x) for x in c), default=0.0)
    thresh = tol * scale
    while c and abs(c[-1]) <= thresh:
        c.pop()
    return tuple(c)


@dataclass(frozen=True)
class Polynomial:
    """Real polynomial, coefficients ascending in degree; () is the zero polynomial."""

    coeffs: tuple[float, ...] = ()

    def __post_init__(self):
        c = _trim(self.coeffs, 0.0)
        for x in c:
            if not math.isfinite(x):
                raise RationalError(f"non-finite polynomial coefficient {x}")
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        """Degree; -1 for the zero polynomial."""
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    def __bool__(self) -> bool:
        return bool(self.coeffs)

    def __add__(self, other: "Polynomial") -> "Polynomial":
        a, b = self.coeffs, other.coeffs
        n = max(len(a), len(b))
        return Polynomial(tuple((a[i] if i < len(a) else 0.0) + (b[i] if i < len(b) else 0.0) for i in range(n)))

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + (-other)

    def __neg__(self) -> "Polynomial":
        return Polynomial(tuple(-x for x in self.coeffs))

    def __mul__(self, other: "Polynomial | float | int") -> "Polynomial":
        if isinstance(other, (int, float)):
            return Polynomial(tuple(x * other for x in self.coeffs))
        if self.is_zero or other.is_zero:
            return Polynomial()
        return Polynomial(tuple(np.convolve(self.coeffs, other.coeffs)))

    __rmul__ = __mul__

    def scaled(self, factor: float) -> "Polynomial":
        return Polynomial(tuple(x * factor for x in self.coeffs))

    def max_abs_coeff(self) -> float:
        return max((abs(x) for x in self.coeffs), default=0.0)

    def monic(self) -> "Polynomial":
        if self.is_zero:
            return self
        lead = self.coeffs[-1]
        return Polynomial(tuple(x / lead for x in self.coeffs))

    def divmod(self, divisor: "Polynomial") -> tuple["Polynomial", "Polynomial"]:
        """Polynomial long division: self = q*divisor + r with deg r < deg divisor."""
        q, r, _ = self._divmod_scaled(divisor)
        return q, r

    def _divmod_scaled(self, divisor: "Polynomial") -> tuple["Polynomial", "Polynomial", float]:
        """Long division also reporting the largest magnitude met during
        elimination -- the scale against which remainder residue is judged."""
        if divisor.is_zero:
            raise RationalError("polynomial division by the zero polynomial")
        rem = list(self.coeffs)
        d = list(divisor.coeffs)
        dn = len(d)
        growth = max((abs(c) for c in rem), default=0.0)
        if len(rem) < dn:
            return Polynomial(), self, growth
        q = [0.0] * (len(rem) - dn + 1)
        for i in range(len(rem) - dn, -1, -1):
            coef = rem[i + dn - 1] / d[-1]
            q[i] = coef
            for j in range(dn):
                rem[i + j] -= coef * d[j]
                growth = max(growth, abs(coef * d[j]))
        return Polynomial(tuple(q)), Polynomial(tuple(rem[: dn - 1])), growth

    def __call__(self, s: complex) -> complex:
        """Horner evaluation."""
        acc = 0.0 + 0.0j
        for c in reversed(self.coeffs):
            acc = acc * s + c
        return acc

    def derivative(self) -> "Polynomial":
        return Polynomial(tuple(i * c for i, c in enumerate(self.coeffs) if i > 0))

    def approx_zero(self, tol: float = EQ_TOL, scale: float = 1.0) -> bool:
        return self.max_abs_coeff() <= tol * max(scale, 1e-300)

    def __repr__(self) -> str:
        if self.is_zero:
            return "Polynomial(0)"
        terms = []
        for i, c in enumerate(self.coeffs):
            if c == 0.0:
                continue
            if i == 0:
                terms.append(f"{c:g}")
            elif i == 1:
                terms.append(f"{c:g}*s")
            else:
                terms.append(f"{c:g}*s^{i}")
        return "Polynomial(" + " + ".join(terms) + ")"


P_ZERO = Polynomial()
P_ONE = Polynomial((1.0,))
P_S = Polynomial((0.0, 1.0))


def poly(*coeffs: float) -> Polynomial:
    """Polynomial from ascending coefficients: poly(1, 2) == 1 + 2s."""
    return Polynomial(tuple(coeffs))


def _unit_norm(p: Polynomial) -> Polynomial:
    m = p.max_abs_coeff()
    return p.scaled(1.0 / m) if m > 0 else p


def _euclid_gcd(a: Polynomial, b: Polynomial, tol: float) -> Polynomial:
    x, y = _unit_norm(a), _unit_norm(b)
    if x.degree < y.degree:
        x, y = y, x
    while not y.is_zero:
        _, r, growth = x._divmod_scaled(y)
        r = Polynomial(_trim([0.0 if abs(c) <= tol * growth else c for c in r.coeffs]))
        x, y = y, _unit_norm(r)
    return x.monic()


def _roots_gcd(a: Polynomial, b: Polynomial, tol: float) -> Polynomial:
    """Cancellation fallback: greedily pair roots of a and b that agree within
    a relative tolerance and rebuild the common factor from the pairs."""
    ra = list(np.roots(list(reversed(a.coeffs))))
    rb = list(np.roots(list(reversed(b.coeffs))))
    common: list[complex] = []
    for r in ra:
        best, best_d = None, None
        for i, q in enumerate(rb):
            d = abs(r - q)
            if best_d is None or d < best_d:
                best, best_d = i, d
        if best is not None and best_d <= tol * (1.0 + abs(r)):
            common.append((r + rb.pop(best)) / 2.0)
    if not common:
        return P_ONE
    g = np.array([1.0 + 0.0j])
    for r in common:
        g = np.convolve(g, [1.0, -r])
    return Polynomial(tuple(float(c.real) for c in reversed(g))).monic()


def poly_gcd(a: Polynomial, b: Polynomial, tol: float = CANCEL_TOL) -> Polynomial:
    """Monic approximate GCD for common-root cancellation.

    Primary path: Euclidean remainders with coefficient thresholding
    (coefficients below tol relative to the magnitudes met during each
    division are treated as exact zeros).  When that fails to produce a
    nontrivial factor -- typical for high-degree products where the
    remainder sequence degrades -- a root-matching pass (roots paired
    within a relative tolerance) is used instead.
    """
    if a.is_zero:
        return b.monic()
    if b.is_zero:
        return a.monic()
    g = _euclid_gcd(a, b, tol)
    if g.degree > 0:
        return g
    if min(a.degree, b.degree) >= 1 and max(a.degree, b.degree) <= 64:
        g2 = _roots_gcd(a, b, max(tol, 1e-8))
        if g2.degree > 0:
            return g2
    return P_ONE


def _cancel_common(num: Polynomial, den: Polynomial, tol: float = CANCEL_TOL) -> tuple[Polynomial, Polynomial]:
    """Remove common factors from num/den, accepting a candidate factor only
    when the simplified ratio agrees with the original at the sample points.

    Root matching needs wide tolerances for multiple roots (an m-fold root is
    only located to about eps**(1/m) by any method), so candidates are tried
    from tight to loose and the value check arbitrates.
    """
    if num.is_zero or den.degree < 1 or num.degree < 1:
        return num, den
    candidates = [_euclid_gcd(num, den, tol)]
    if max(num.degree, den.degree) <= 64:
        for match_tol in (1e-8, 1e-6, 1e-4):
            candidates.append(_roots_gcd(num, den, match_tol))
    for g in candidates:
        if g.degree < 1:
            continue
        qn, _, _ = num._divmod_scaled(g)
        qd, _, _ = den._divmod_scaled(g)
        if qd.is_zero:
            continue
        if qn.is_zero:
            if _same_function(num, den, P_ZERO, P_ONE):
                return P_ZERO, P_ONE
            continue
        if _same_function(num, den, qn, qd):
            return qn, qd
    return num, den


# Fixed sample points for value-based validation of simplifications.
_CHECK_POINTS = (0.17 + 0.93j, 1.31 - 0.72j, -1.09 + 2.31j, 2.93j,
                 4.71 + 0.39j, -0.23 - 3.17j, 0.057 + 0.011j, 7.9 - 5.3j)


def _same_function(n1: Polynomial, d1: Polynomial, n2: Polynomial, d2: Polynomial,
                   rel: float = 1e-11) -> bool:
    """Do n1/d1 and n2/d2 agree at the fixed sample points (away from poles)?"""
    checked = 0
    for s in _CHECK_POINTS:
        dv1, dv2 = d1(s), d2(s)
        scale1 = max((abs(c) for c in d1.coeffs), default=0.0) * max(1.0, abs(s)) ** max(d1.degree, 0)
        scale2 = max((abs(c) for c in d2.coeffs), default=0.0) * max(1.0, abs(s)) ** max(d2.degree, 0)
        if abs(dv1) < 1e-9 * scale1 or abs(dv2) < 1e-9 * scale2:
            continue
        v1 = n1(s) / dv1
        v2 = n2(s) / dv2
        if abs(v1 - v2) > rel * max(abs(v1), abs(v2), 1e-12):
            return False
        checked += 1
    return checked >= 3


def poly_div_exact(a: Polynomial, g: Polynomial, tol: float = CANCEL_TOL) -> Polynomial | None:
    """Divide a by a candidate factor g; None when the division is not clean
    (remainder above tol relative to the division's growth scale)."""
    q, r, growth = a._divmod_scaled(g)
    if not r.approx_zero(tol, max(growth, 1e-300)):
        return None
    return q


@dataclass(frozen=True)
class ComplexFrequency:
    """A point s = sigma + i*omega: sigma in 1/yr (discount), omega in rad/yr."""

    sigma: float = 0.0
    omega: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.sigma) and math.isfinite(self.omega)):
            raise RationalError("complex frequency components must be finite")

    @property
    def s(self) -> complex:
        return complex(self.sigma, self.omega)

    @classmethod
    def from_cycles(cls, f: float) -> "ComplexFrequency":
        """Purely oscillatory point at f cycles/yr."""
        return cls(0.0, 2.0 * math.pi * f)


@dataclass(frozen=True)
class RationalFunction:
    """Ratio of real polynomials in s, stored normalized (monic denominator,
    common roots cancelled within CANCEL_TOL)."""

    num: Polynomial
    den: Polynomial

    def __post_init__(self):
        if self.den.is_zero:
            raise RationalError("rational function with zero denominator")
        num, den = self.num, self.den
        # Zap cancellation residue relative to the joint coefficient scale.
        scale = max(num.max_abs_coeff(), den.max_abs_coeff())
        num = Polynomial(tuple(0.0 if abs(c) <= ARITH_EPS * scale else c for c in num.coeffs))
        den = Polynomial(tuple(0.0 if abs(c) <= ARITH_EPS * scale else c for c in den.coeffs))
        if den.is_zero:
            raise RationalError("denominator vanished within arithmetic tolerance")
        if num.is_zero:
            object.__setattr__(self, "num", P_ZERO)
            object.__setattr__(self, "den", P_ONE)
            return
        num, den = _cancel_common(num, den)
        if num.is_zero:
            object.__setattr__(self, "num", P_ZERO)
            object.__setattr__(self, "den", P_ONE)
            return
        lead = den.coeffs[-1]
        object.__setattr__(self, "num", num.scaled(1.0 / lead))
        object.__setattr__(self, "den", den.monic())

    # -- algebra ---------------------------------------------------------

    def __add__(self, other: "RationalFunction | float | int") -> "RationalFunction":
        other = as_rf(other)
        if self.den.coeffs == other.den.coeffs:
            return RationalFunction(self.num + other.num, self.den)
        return RationalFunction(self.num * other.den + other.num * self.den, self.den * other.den)

    __radd__ = __add__

    def __sub__(self, other: "RationalFunction | float | int") -> "RationalFunction":
        return self + (-as_rf(other))

    def __rsub__(self, other):
        return as_rf(other) - self

    def __neg__(self) -> "RationalFunction":
        return RationalFunction(-self.num, self.den)

    def __mul__(self, other: "RationalFunction | float | int") -> "RationalFunction":
        other = as_rf(other)
        return RationalFunction(self.num * other.num, self.den * other.den)

    __rmul__ = __mul__

    def __truediv__(self, other: "RationalFunction | float | int") -> "RationalFunction":
        other = as_rf(other)
        if other.is_zero:
            raise RationalError("division by the zero rational function")
        if self.den.coeffs == other.den.coeffs:
            return RationalFunction(self.num, other.num)
        return RationalFunction(self.num * other.den, self.den * other.num)

    def __rtruediv__(self, other):
        return as_rf(other) / self

    @property
    def is_zero(self) -> bool:
        return self.num.is_zero

    def equals(self, other: "RationalFunction | float | int", tol: float = EQ_TOL) -> bool:
        """Cross-multiplication equality: a/b == c/d iff a*d - c*b ~ 0.

        The zero threshold is relative to the cross products and to the
        denominator product, so a function whose numerator is pure residue
        relative to its (monic) denominator compares equal to zero.
        """
        other = as_rf(other)
        lhs = self.num * other.den
        rhs = other.num * self.den
        scale = max(lhs.max_abs_coeff(), rhs.max_abs_coeff(),
                    (self.den * other.den).max_abs_coeff())
        return (lhs - rhs).approx_zero(tol, scale if scale > 0 else 1.0)

    def __eq__(self, other) -> bool:  # type: ignore[override]
        if isinstance(other, (RationalFunction, int, float)):
            return self.equals(other)
        return NotImplemented

    def __hash__(self):
        return hash((self.num.coeffs, self.den.coeffs))

    # -- evaluation ------------------------------------------------------

    def __call__(self, s: "complex | ComplexFrequency", pole_floor: float = POLE_FLOOR) -> complex:
        """Evaluate num(s)/den(s) by Horner; refuses points near poles."""
        if isinstance(s, ComplexFrequency):
            s = s.s
        dv = self.den(s)
        floor = pole_floor * (1.0 + abs(s) ** max(self.den.degree, 0))
        if abs(dv) < floor:
            raise PoleEvaluationError(s, abs(dv))
        return self.num(s) / dv

    # -- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        return {"num": list(self.num.coeffs), "den": list(self.den.coeffs)}

    @classmethod
    def from_dict(cls, d: dict) -> "RationalFunction":
        return cls(Polynomial(tuple(d["num"])), Polynomial(tuple(d["den"])))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "RationalFunction":
        return cls.from_dict(json.loads(text))

    def __repr__(self) -> str:
        return f"RF({self.num!r} / {self.den!r})"


RF_ZERO = RationalFunction(P_ZERO, P_ONE)
RF_ONE = RationalFunction(P_ONE, P_ONE)
RF_S = RationalFunction(P_S, P_ONE)


def as_rf(x: "RationalFunction | float | int") -> RationalFunction:
    if isinstance(x, RationalFunction):
        return x
    return RationalFunction(Polynomial((float(x),)), P_ONE)


def rf(num: Iterable[float], den: Iterable[float] = (1.0,)) -> RationalFunction:
    """Rational function from ascending coefficient lists: rf([0,1],[2]) == s/2."""
    return RationalFunction(Polynomial(tuple(num)), Polynomial(tuple(den)))


class SingularMatrixError(RationalError):
    """2x2 inversion with an identically-zero determinant."""


@dataclass(frozen=True)
class Matrix2:
    """2x2 matrix over rational functions."""

    a11: RationalFunction
    a12: RationalFunction
    a21: RationalFunction
    a22: RationalFunction

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[RationalFunction | float | int]]) -> "Matrix2":
        (a, b), (c, d) = rows
        return cls(as_rf(a), as_rf(b), as_rf(c), as_rf(d))

    @classmethod
    def identity(cls) -> "Matrix2":
        return cls(RF_ONE, RF_ZERO, RF_ZERO, RF_ONE)

    def __matmul__(self, other: "Matrix2") -> "Matrix2":
        return Matrix2(
            self.a11 * other.a11 + self.a12 * other.a21,
            self.a11 * other.a12 + self.a12 * other.a22,
            self.a21 * other.a11 + self.a22 * other.a21,
            self.a21 * other.a12 + self.a22 * other.a22,
        )

    def __add__(self, other: "Matrix2") -> "Matrix2":
        return Matrix2(self.a11 + other.a11, self.a12 + other.a12,
                       self.a21 + other.a21, self.a22 + other.a22)

    def scaled(self, factor: "RationalFunction | float") -> "Matrix2":
        f = as_rf(factor)
        return Matrix2(self.a11 * f, self.a12 * f, self.a21 * f, self.a22 * f)

    def det(self) -> RationalFunction:
        return self.a11 * self.a22 - self.a12 * self.a21

    def inv(self) -> "Matrix2":
        d = self.det()
        if d.is_zero:
            raise SingularMatrixError(f"singular 2x2 matrix: determinant {d!r} is identically zero")
        return Matrix2(self.a22 / d, -self.a12 / d, -self.a21 / d, self.a11 / d)

    def equals(self, other: "Matrix2", tol: float = EQ_TOL) -> bool:
        return (self.a11.equals(other.a11, tol) and self.a12.equals(other.a12, tol)
                and self.a21.equals(other.a21, tol) and self.a22.equals(other.a22, tol))

    def __eq__(self, other) -> bool:  # type: ignore[override]
        if isinstance(other, Matrix2):
            return self.equals(other)
        return NotImplemented

    def __hash__(self):
        return hash((self.a11, self.a12, self.a21, self.a22))

    def entries(self) -> tuple[RationalFunction, RationalFunction, RationalFunction, RationalFunction]:
        return (self.a11, self.a12, self.a21, self.a22)

    def __call__(self, s: "complex | ComplexFrequency") -> np.ndarray:
        """Evaluate entrywise to a complex 2x2 ndarray."""
        return np.array([[self.a11(s), self.a12(s)], [self.a21(s), self.a22(s)]], dtype=complex)

    def to_nested(self) -> list:
        return [[self.a11.to_dict(), self.a12.to_dict()], [self.a21.to_dict(), self.a22.to_dict()]]

    @classmethod
    def from_nested(cls, rows: list) -> "Matrix2":
        return cls(RationalFunction.from_dict(rows[0][0]), RationalFunction.from_dict(rows[0][1]),
                   RationalFunction.from_dict(rows[1][0]), RationalFunction.from_dict(rows[1][1]))
