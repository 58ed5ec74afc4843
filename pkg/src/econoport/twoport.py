"""Two-port behavioral operators: parameter models, conversions, aggregation.

A 2-port agent relates the conjugate signal pairs (F, V) at its upstream and
downstream ports through a 2x2 matrix of rational functions.  The five
parameter kinds fix which pair is independent:

    Y (admittance):    (F_u, F_d) = y (V_u, V_d)
    Z (impedance):     (V_u, V_d) = z (F_u, F_d)
    H (hybrid):        (V_u, F_d) = h (F_u, V_d)
    G (inverse hybrid):(F_u, V_d) = g (V_u, F_d)
    T (transmission):  (V_d, F_d) = t (V_u, -F_u)

All port flows are positive into the + terminal.  With the T orientation
above, physically chaining stages composes output-side first: a chain listed
source-to-sink as [m1, ..., mn] has t_chain = t_n @ ... @ t_1.  ``aggregate``
takes chain lists in source-to-sink order and performs that product.

Interaction modes map onto interconnection topologies with an additive (or,
for chains, multiplicative) algebra:

    competition   -> parallel        sum of Y
    cooperation   -> series          sum of Z
    franchise     -> series-parallel sum of H
    cartel        -> parallel-series sum of G
    chain         -> cascade         product of T

and the representative agent is the arithmetic mean (geometric mean for
chains, taken numerically per frequency).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .rational import (
    ComplexFrequency,
    Matrix2,
    Polynomial,
    RationalFunction,
    RF_ONE,
    RF_S,
    RationalError,
    as_rf,
    rf,
)


class ParameterKind(enum.Enum):
    Y = "Y"
    Z = "Z"
    T = "T"
    H = "H"
    G = "G"


class InterconnectKind(enum.Enum):
    PARALLEL = "parallel"
    SERIES = "series"
    SERIES_PARALLEL = "series-parallel"
    PARALLEL_SERIES = "parallel-series"
    CASCADE = "cascade"


#: canonical parameter kind per interconnection topology
CANONICAL_KIND = {
    InterconnectKind.PARALLEL: ParameterKind.Y,
    InterconnectKind.SERIES: ParameterKind.Z,
    InterconnectKind.SERIES_PARALLEL: ParameterKind.H,
    InterconnectKind.PARALLEL_SERIES: ParameterKind.G,
    InterconnectKind.CASCADE: ParameterKind.T,
}


class ConversionError(RationalError):
    """A parameter-kind conversion is blocked by a vanishing pivot."""


@dataclass(frozen=True)
class _CDM:
    """2x2 matrix of polynomials over one common denominator polynomial.

    Conversions are done in this representation: every target entry is then a
    single ratio of polynomial products, which keeps intermediate degrees low
    and avoids compounding rational-arithmetic roundoff."""

    p11: Polynomial
    p12: Polynomial
    p21: Polynomial
    p22: Polynomial
    q: Polynomial

    @classmethod
    def of(cls, m: Matrix2) -> "_CDM":
        e = m.entries()
        dens = [x.den for x in e]
        if all(d.coeffs == dens[0].coeffs for d in dens[1:]):
            return cls(e[0].num, e[1].num, e[2].num, e[3].num, dens[0])
        q = dens[0] * dens[1] * dens[2] * dens[3]
        ps = []
        for i, x in enumerate(e):
            others = [dens[j] for j in range(4) if j != i]
            ps.append(x.num * others[0] * others[1] * others[2])
        return cls(ps[0], ps[1], ps[2], ps[3], q)

    def det(self) -> Polynomial:
        return self.p11 * self.p22 - self.p12 * self.p21

    def to_matrix(self) -> Matrix2:
        return Matrix2(RationalFunction(self.p11, self.q), RationalFunction(self.p12, self.q),
                       RationalFunction(self.p21, self.q), RationalFunction(self.p22, self.q))


@dataclass(frozen=True)
class ParameterModel:
    """A 2x2 parameter matrix tagged with its kind and port labels."""

    kind: ParameterKind
    m: Matrix2
    port_labels: tuple[str, str] = ("upstream", "downstream")

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "m": self.m.to_nested(), "ports": list(self.port_labels)}

    @classmethod
    def from_dict(cls, d: dict) -> "ParameterModel":
        return cls(ParameterKind(d["kind"]), Matrix2.from_nested(d["m"]), tuple(d["ports"]))

    def __call__(self, s) -> np.ndarray:
        return self.m(s)


# ---------------------------------------------------------------------------
# conversions (hub kind: Z)
# ---------------------------------------------------------------------------

def _require_nonzero(p: Polynomial, what: str) -> Polynomial:
    if p.is_zero:
        raise ConversionError(f"conversion blocked: {what} is identically zero")
    return p


def _cdm_inv(m: _CDM, what: str) -> _CDM:
    d = _require_nonzero(m.det(), what)
    return _CDM(m.q * m.p22, -(m.q * m.p12), -(m.q * m.p21), m.q * m.p11, d)


def _z_h_swap(m: _CDM, pivot_name: str) -> _CDM:
    # z -> h and h -> z share one involutive formula:
    #   out = [[det, q*p12], [-q*p21, q*q]] / (q * p22)
    p22 = _require_nonzero(m.p22, pivot_name)
    return _CDM(m.det(), m.q * m.p12, -(m.q * m.p21), m.q * m.q, m.q * p22)


def _z_g_swap(m: _CDM, pivot_name: str) -> _CDM:
    # z -> g and g -> z:  out = [[q*q, -q*p12], [q*p21, det]] / (q * p11)
    p11 = _require_nonzero(m.p11, pivot_name)
    return _CDM(m.q * m.q, -(m.q * m.p12), m.q * m.p21, m.det(), m.q * p11)


def _z_to_t(m: _CDM) -> _CDM:
    p12 = _require_nonzero(m.p12, "z12")
    return _CDM(m.q * m.p22, m.det(), m.q * m.q, m.q * m.p11, m.q * p12)


def _t_to_z(m: _CDM) -> _CDM:
    p21 = _require_nonzero(m.p21, "t21")
    return _CDM(m.q * m.p22, m.q * m.q, m.det(), m.q * m.p11, m.q * p21)


def _to_z_cdm(kind: ParameterKind, m: _CDM) -> _CDM:
    if kind is ParameterKind.Z:
        return m
    if kind is ParameterKind.Y:
        return _cdm_inv(m, "det(y)")
    if kind is ParameterKind.H:
        return _z_h_swap(m, "h22")
    if kind is ParameterKind.G:
        return _z_g_swap(m, "g11")
    if kind is ParameterKind.T:
        return _t_to_z(m)
    raise ConversionError(f"unsupported source kind {kind}")


def _from_z_cdm(target: ParameterKind, z: _CDM) -> _CDM:
    if target is ParameterKind.Z:
        return z
    if target is ParameterKind.Y:
        return _cdm_inv(z, "det(z)")
    if target is ParameterKind.H:
        return _z_h_swap(z, "z22")
    if target is ParameterKind.G:
        return _z_g_swap(z, "z11")
    if target is ParameterKind.T:
        return _z_to_t(z)
    raise ConversionError(f"unsupported target kind {target}")


def convert(model: ParameterModel, target: ParameterKind) -> ParameterModel:
    """Convert a parameter model to another kind (routing through Z)."""
    if model.kind is target:
        return model
    z = _to_z_cdm(model.kind, _CDM.of(model.m))
    out = _from_z_cdm(target, z)
    return ParameterModel(target, out.to_matrix(), model.port_labels)


def y_to_t_direct(model: ParameterModel) -> ParameterModel:
    """Direct admittance-to-transmission conversion.

    Eliminating (V_d) from the admittance relations under this package's T
    orientation gives t = (-1/y12) [[y11, 1], [det y, y22]].  Equivalent to
    routing through Z; kept as an independently coded path and cross-checked
    in the test suite.
    """
    if model.kind is not ParameterKind.Y:
        raise ConversionError("y_to_t_direct requires a Y-kind model")
    y = model.m
    y12 = _require_nonzero(y.a12, "y12")
    scale = as_rf(-1) / y12
    m = Matrix2(y.a11, RF_ONE, y.det(), y.a22).scaled(scale)
    return ParameterModel(ParameterKind.T, m, model.port_labels)


# ---------------------------------------------------------------------------
# aggregation and representative agents
# ---------------------------------------------------------------------------

def aggregate(kind: InterconnectKind, models: Sequence[ParameterModel]) -> ParameterModel:
    """Equivalent operator for agents interacting in the given mode.

    Additive modes sum the canonical-kind matrices.  Cascade takes the models
    in source-to-sink (upstream to downstream) order and returns the chain
    operator; under the T orientation used here that is the product with the
    sink-side factor leftmost.
    """
    if not models:
        raise ValueError("aggregate requires at least one model")
    canonical = CANONICAL_KIND[kind]
    mats = [convert(m, canonical).m for m in models]
    if kind is InterconnectKind.CASCADE:
        acc = mats[-1]
        for m in reversed(mats[:-1]):
            acc = acc @ m
    else:
        acc = mats[0]
        for m in mats[1:]:
            acc = acc + m
    return ParameterModel(canonical, acc, models[0].port_labels)


class RepresentativeError(RationalError):
    """Geometric-mean extraction failed at one or more frequencies."""

    def __init__(self, bad: list[ComplexFrequency], reason: str):
        self.bad_frequencies = bad
        super().__init__(f"representative agent undefined at {len(bad)} frequencies ({reason}): "
                         + ", ".join(f"{f.s}" for f in bad[:5]))


def representative(kind: InterconnectKind, models: Sequence[ParameterModel],
                   at: Sequence[ComplexFrequency]) -> list[np.ndarray]:
    """Representative-agent matrix evaluated at each frequency.

    Additive modes return the arithmetic mean (symbolic mean, then evaluated).
    Cascade returns the principal n-th root of the evaluated chain product,
    computed per frequency by eigendecomposition with eigenvalue arguments
    taken in (-pi, pi].
    """
    if not models:
        raise ValueError("representative requires at least one model")
    n = len(models)
    agg = aggregate(kind, models)
    if kind is not InterconnectKind.CASCADE:
        mean = agg.m.scaled(1.0 / n)
        return [mean(f.s) for f in at]

    out: list[np.ndarray] = []
    bad: list[ComplexFrequency] = []
    reason = ""
    for f in at:
        p = agg.m(f.s)
        lam, vecs = np.linalg.eig(p)
        if np.any(np.abs(lam) < 1e-300):
            bad.append(f)
            reason = "zero eigenvalue"
            out.append(None)  # type: ignore[arg-type]
            continue
        cond = np.linalg.cond(vecs)
        if not np.isfinite(cond) or cond > 1e10:
            bad.append(f)
            reason = "defective eigenstructure"
            out.append(None)  # type: ignore[arg-type]
            continue
        root = vecs @ np.diag(np.exp(np.log(lam.astype(complex)) / n)) @ np.linalg.inv(vecs)
        out.append(root)
    if bad:
        raise RepresentativeError(bad, reason)
    return out


# ---------------------------------------------------------------------------
# reciprocity
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReciprocityReport:
    is_reciprocal: bool
    identity: str
    witness: RationalFunction = field(default_factory=lambda: rf([0.0]))


def reciprocity_check(model: ParameterModel, tol: float = 1e-9) -> ReciprocityReport:
    """Check the kind-appropriate reciprocity identity.

    Y: y12 == y21, Z: z12 == z21, H: h12 == -h21, G: g12 == -g21,
    T: det t == 1 -- all under cross-multiplication equality.
    """
    m = model.m
    if model.kind in (ParameterKind.Y, ParameterKind.Z):
        witness = m.a12 - m.a21
        name = "m12 - m21"
    elif model.kind in (ParameterKind.H, ParameterKind.G):
        witness = m.a12 + m.a21
        name = "m12 + m21"
    else:
        witness = m.det() - RF_ONE
        name = "det(t) - 1"
    ok = witness.equals(0, tol)
    return ReciprocityReport(ok, name, witness)


# ---------------------------------------------------------------------------
# stock model factories
# ---------------------------------------------------------------------------

def trader_model(eps: float, b: float, k: float,
                 kind: ParameterKind = ParameterKind.Z) -> ParameterModel:
    """Behavioral operator of the canonical trader (middleman) agent.

    The trader keeps a price on a demand element between the ports
    (elasticity eps), an inventory behind a pricing-friction ladder on the
    downstream side, with b the friction per unit flow ($ flow premium) and
    k the inventory scarcity constant.  Impedance entries:

        z11 = (s^2 + eps*b*s + eps*k) / (eps*s)
        z12 = z21 = z22 = (b*s + k) / s

    Other kinds are produced by conversion.  Note the internal element
    elasticities are the reciprocals of b and k: friction elasticity 1/b,
    storage elasticity 1/k.
    """
    if eps <= 0 or b <= 0 or k <= 0:
        raise ValueError("trader parameters must be positive")
    z11 = rf([eps * k, eps * b, 1.0], [0.0, eps])
    w = rf([k, b], [0.0, 1.0])
    z = ParameterModel(ParameterKind.Z, Matrix2(z11, w, w, w))
    return convert(z, kind)


def consumer_model(eps_matrix: Sequence[Sequence[float]]) -> ParameterModel:
    """Two-good consumer: y = (1/s) * [[eps11, eps12], [eps21, eps22]].

    Diagonal entries are the own-price elasticities, off-diagonal the
    cross-elasticities (symmetric coupling).
    """
    (e11, e12), (e21, e22) = eps_matrix
    if abs(e12 - e21) > 1e-12 * max(abs(e12), abs(e21), 1.0):
        raise ValueError("cross-elasticities must be symmetric")
    inv_s = RF_ONE / RF_S
    m = Matrix2(as_rf(e11) * inv_s, as_rf(e12) * inv_s, as_rf(e21) * inv_s, as_rf(e22) * inv_s)
    return ParameterModel(ParameterKind.Y, m, ("good-1", "good-2"))


def pid_policy(kp: float, ki: float, kd: float, wf: float = 1e3) -> RationalFunction:
    """PID policy function Kp + Ki/s + Kd*s, derivative filtered at wf rad/yr.

    The derivative term is realized as Kd*s*wf/(s + wf) so the result stays a
    proper rational function.
    """
    s = RF_S
    out = as_rf(kp)
    if ki:
        out = out + as_rf(ki) / s
    if kd:
        out = out + as_rf(kd) * s * as_rf(wf) / (s + as_rf(wf))
    return out


def reserve_bank_model(policy: RationalFunction) -> ParameterModel:
    """Rate-setting institution reacting to the spread between a target and an
    actual flow: z = I(s) * [[1, -1], [1, -1]]."""
    m = Matrix2(policy, -policy, policy, -policy)
    return ParameterModel(ParameterKind.Z, m, ("target", "actual"))
