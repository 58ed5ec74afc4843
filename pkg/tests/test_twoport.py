"""Parameter-model conversions, aggregation algebra, and the trader catalog."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from econoport.rational import ComplexFrequency, Matrix2, RationalFunction, poly, rf
from econoport.twoport import (
    ConversionError,
    InterconnectKind,
    ParameterKind,
    ParameterModel,
    RepresentativeError,
    aggregate,
    consumer_model,
    convert,
    pid_policy,
    reciprocity_check,
    representative,
    reserve_bank_model,
    trader_model,
    y_to_t_direct,
)

EPS, B, K = 2.0, 3.0, 5.0


def trader_y_reference(eps=EPS, b=B, k=K) -> Matrix2:
    neg = rf([-eps], [0, 1])
    return Matrix2(
        rf([eps], [0, 1]), neg,
        neg, rf([eps * k, eps * b, 1.0], [0.0, k, b]),
    )


def trader_z_reference(eps=EPS, b=B, k=K) -> Matrix2:
    w = rf([k, b], [0, 1])
    return Matrix2(rf([eps * k, eps * b, 1.0], [0.0, eps]), w, w, w)


def trader_h_reference(eps=EPS, b=B, k=K) -> Matrix2:
    return Matrix2(rf([0, 1], [eps]), rf([1]), rf([-1]), rf([0, 1], [k, b]))


def trader_t_reference(eps=EPS, b=B, k=K) -> Matrix2:
    # Derived by eliminating the upstream pair from the impedance relations.
    # The published tabulation of this model carries t22 = (b s + k)/eps,
    # which is inconsistent with its own z matrix (and has det != 1); the
    # consistent entry is t22 = (s^2 + eps b s + eps k) / (eps (b s + k)).
    return Matrix2(
        rf([1]), rf([0, 1], [eps]),
        rf([0, 1], [k, b]), rf([eps * k, eps * b, 1.0], [eps * k, eps * b]),
    )


def random_nonsingular_model(rng, kind=ParameterKind.Z) -> ParameterModel:
    """Random model with the physical structure of a network parameter
    matrix: polynomial entries over one shared characteristic denominator."""
    while True:
        den = poly(*rng.uniform(0.5, 3, size=rng.integers(2, 5)))
        entries = [RationalFunction(poly(*rng.uniform(-3, 3, size=rng.integers(1, 4))), den)
                   for _ in range(4)]
        m = Matrix2(*entries)
        if m.det().is_zero or any(e.is_zero for e in m.entries()):
            continue
        return ParameterModel(kind, m)


# -- trader catalog vs. hand references ------------------------------------

def test_trader_z_matches_reference():
    assert trader_model(EPS, B, K, ParameterKind.Z).m == trader_z_reference()


def test_trader_z_inverse_is_trader_y():
    z = trader_model(EPS, B, K, ParameterKind.Z)
    assert z.m.inv() == trader_y_reference()


def test_trader_det_z():
    z = trader_model(EPS, B, K, ParameterKind.Z)
    assert z.m.det() == rf([K, B], [EPS])


def test_convert_trader_z_to_y():
    y = convert(trader_model(EPS, B, K, ParameterKind.Z), ParameterKind.Y)
    assert y.m == trader_y_reference()


def test_convert_trader_to_h():
    h = convert(trader_model(EPS, B, K, ParameterKind.Z), ParameterKind.H)
    assert h.m == trader_h_reference()


def test_convert_trader_y_to_t():
    t = convert(trader_model(EPS, B, K, ParameterKind.Y), ParameterKind.T)
    ref = trader_t_reference()
    assert t.m == ref
    assert t.m.det() == rf([1])


def test_trader_y_z_product_is_identity():
    y = trader_model(EPS, B, K, ParameterKind.Y)
    z = trader_model(EPS, B, K, ParameterKind.Z)
    assert (y.m @ z.m) == Matrix2.identity()


def test_trader_h_g_product_is_identity():
    h = trader_model(EPS, B, K, ParameterKind.H)
    g = trader_model(EPS, B, K, ParameterKind.G)
    assert (h.m @ g.m) == Matrix2.identity()


def test_identity_conversion_returns_same_model():
    z = trader_model(EPS, B, K, ParameterKind.Z)
    assert convert(z, ParameterKind.Z) is z


# -- reciprocity ------------------------------------------------------------

def test_trader_y_reciprocal():
    rep = reciprocity_check(trader_model(EPS, B, K, ParameterKind.Y))
    assert rep.is_reciprocal


def test_identity_t_reciprocal():
    t = ParameterModel(ParameterKind.T, Matrix2.identity())
    assert reciprocity_check(t).is_reciprocal


def test_derived_trader_t_has_unit_determinant():
    t = trader_model(EPS, B, K, ParameterKind.T)
    rep = reciprocity_check(t)
    assert rep.is_reciprocal
    assert t.m.det() == rf([1])


def test_nonreciprocal_witness():
    m = Matrix2(rf([1]), rf([2]), rf([3]), rf([4]))
    rep = reciprocity_check(ParameterModel(ParameterKind.Y, m))
    assert not rep.is_reciprocal
    assert rep.witness == rf([-1])


# -- direct y->t vs hub route (conversion algebra) --------------------------

def test_y_to_t_direct_matches_hub_on_trader():
    y = trader_model(EPS, B, K, ParameterKind.Y)
    assert y_to_t_direct(y).m == convert(y, ParameterKind.T).m


def test_y_to_t_direct_matches_hub_bulk():
    rng = np.random.default_rng(2024)
    checked = 0
    while checked < 100:
        m = random_nonsingular_model(rng, ParameterKind.Y)
        try:
            direct = y_to_t_direct(m)
            hub = convert(m, ParameterKind.T)
        except ConversionError:
            continue
        checked += 1
        pts = [complex(0.3, w) for w in (0.7, 2.9, 11.0)]
        for s in pts:
            a, b = direct.m(s), hub.m(s)
            assert np.allclose(a, b, rtol=1e-9, atol=1e-12)


def test_y_to_t_blocked_when_y12_zero():
    m = Matrix2(rf([1]), rf([0]), rf([0]), rf([1]))
    with pytest.raises(ConversionError):
        y_to_t_direct(ParameterModel(ParameterKind.Y, m))


# -- conversion round trips --------------------------------------------------

ALL_KINDS = list(ParameterKind)


def test_conversion_round_trips_bulk():
    rng = np.random.default_rng(99)
    done = 0
    while done < 100:
        m = random_nonsingular_model(rng)
        try:
            for k2 in ALL_KINDS:
                back = convert(convert(m, k2), m.kind)
                assert back.m == m.m
        except ConversionError:
            continue
        done += 1


# -- aggregation --------------------------------------------------------------

def test_aggregate_single_is_conversion():
    m = trader_model(EPS, B, K, ParameterKind.Z)
    agg = aggregate(InterconnectKind.PARALLEL, [m])
    assert agg.kind is ParameterKind.Y
    assert agg.m == trader_y_reference()


def test_aggregate_parallel_doubles_identical_traders():
    y = trader_model(EPS, B, K, ParameterKind.Y)
    agg = aggregate(InterconnectKind.PARALLEL, [y, y])
    assert agg.m == y.m.scaled(rf([2]))


def test_aggregate_empty_raises():
    with pytest.raises(ValueError):
        aggregate(InterconnectKind.SERIES, [])


def test_cascade_is_chain_product():
    # Chain [a, b] listed source-to-sink composes output-side first.
    a = trader_model(1.0, 1.0, 2.0, ParameterKind.T)
    b = trader_model(4.0, 0.5, 1.0, ParameterKind.T)
    agg = aggregate(InterconnectKind.CASCADE, [a, b])
    assert agg.m == (b.m @ a.m)


def test_cascade_associative():
    a = trader_model(1.0, 1.0, 2.0, ParameterKind.T)
    b = trader_model(4.0, 0.5, 1.0, ParameterKind.T)
    c = trader_model(2.0, 2.0, 3.0, ParameterKind.T)
    left = aggregate(InterconnectKind.CASCADE,
                     [ParameterModel(ParameterKind.T, aggregate(InterconnectKind.CASCADE, [a, b]).m), c])
    whole = aggregate(InterconnectKind.CASCADE, [a, b, c])
    assert whole.m == left.m


# -- representative agents ----------------------------------------------------

FREQS = [ComplexFrequency.from_cycles(f) for f in (0.05, 0.5, 5.0)]


def test_representative_of_identical_agents_is_the_agent():
    m = trader_model(EPS, B, K, ParameterKind.Y)
    reps = representative(InterconnectKind.PARALLEL, [m, m, m], FREQS)
    for f, r in zip(FREQS, reps):
        assert np.allclose(r, m.m(f.s), rtol=1e-12)


def test_representative_series_is_mean():
    z1 = trader_model(EPS, B, K, ParameterKind.Z)
    z2 = trader_model(2 * EPS, B, 2 * K, ParameterKind.Z)
    reps = representative(InterconnectKind.SERIES, [z1, z2], FREQS)
    for f, r in zip(FREQS, reps):
        assert np.allclose(r, (z1.m(f.s) + z2.m(f.s)) / 2, rtol=1e-12)


def test_representative_cascade_root_squares_back():
    t = trader_model(EPS, B, K, ParameterKind.T)
    reps = representative(InterconnectKind.CASCADE, [t, t], FREQS)
    for f, r in zip(FREQS, reps):
        expect = t.m(f.s) @ t.m(f.s)
        assert np.allclose(r @ r, expect, rtol=1e-9, atol=1e-12)


def test_representative_consistency_additive():
    z1 = trader_model(EPS, B, K, ParameterKind.Z)
    z2 = trader_model(1.0, 2.0, 7.0, ParameterKind.Z)
    agg = aggregate(InterconnectKind.SERIES, [z1, z2])
    reps = representative(InterconnectKind.SERIES, [z1, z2], FREQS)
    for f, r in zip(FREQS, reps):
        assert np.allclose(2 * r, agg.m(f.s), rtol=1e-9)


def test_representative_cascade_zero_eigenvalue_errors():
    m = ParameterModel(ParameterKind.T, Matrix2(rf([0]), rf([0]), rf([0]), rf([0, 1])))
    with pytest.raises(RepresentativeError) as ei:
        representative(InterconnectKind.CASCADE, [m, m], FREQS)
    assert ei.value.bad_frequencies


# -- other catalog entries -----------------------------------------------------

def test_consumer_model_layout():
    c = consumer_model([[3.0, 0.5], [0.5, 2.0]])
    assert c.kind is ParameterKind.Y
    assert c.m.a11 == rf([3], [0, 1])
    assert c.m.a12 == rf([0.5], [0, 1])
    assert reciprocity_check(c).is_reciprocal


def test_consumer_model_requires_symmetry():
    with pytest.raises(ValueError):
        consumer_model([[3.0, 0.5], [0.4, 2.0]])


def test_reserve_bank_reacts_to_spread():
    z = reserve_bank_model(pid_policy(2.0, 0.0, 0.0))
    s = 1.3j
    m = z.m(s)
    flows = np.array([5.0, 3.0])
    v = m @ flows
    assert v[0] == pytest.approx(2.0 * (5.0 - 3.0))
    assert v[1] == pytest.approx(v[0])


def test_pid_policy_values():
    pol = pid_policy(1.0, 2.0, 0.5, wf=1e3)
    s = 2j
    expect = 1.0 + 2.0 / s + 0.5 * s * 1e3 / (s + 1e3)
    assert pol(s) == pytest.approx(expect, rel=1e-12)


def test_parameter_model_json_roundtrip():
    y = trader_model(EPS, B, K, ParameterKind.Y)
    back = ParameterModel.from_dict(y.to_dict())
    assert back.kind is ParameterKind.Y
    assert back.m == y.m
    assert back.port_labels == y.port_labels
