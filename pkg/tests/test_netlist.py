"""Deck parsing, canonical printing, and hierarchical elaboration."""

import pytest

from econoport.netlist import (
    DuplicateNameError,
    ElementKind,
    FloatingNodeError,
    MalformedParameterError,
    MissingGroundError,
    NetlistSyntaxError,
    PortConnectionError,
    RecursiveSubcircuitError,
    UndefinedSubcircuitError,
    UnknownElementError,
    UnknownProbeError,
    Waveform,
    elaborate,
    parse,
    parse_number,
    print_netlist,
)

TRADER_DECK = """\
.TITLE trader demo
.SUBCKT trader up+ up- dn+ dn-
  DEMAND l1 up+ dn+ eps=2
  FRICTION r1 dn+ mid b=0.3333333333333333
  STORAGE c1 mid dn- k=0.2
.ENDS
FSRC src 0 in DC(1)
Xt1 in 0 out 0 trader
DEMAND cust out 0 eps=1
.TRAN 0.01 10 method=trap ic=op
.PROBE I(cust) V(out)
"""


def test_empty_deck():
    n = parse("")
    assert n.top_instances == () and n.subckt_defs == () and n.directives == ()


def test_trader_subckt_parses():
    n = parse(TRADER_DECK)
    sub = n.subckt("trader")
    assert sub is not None
    assert len(sub.ports) == 2
    assert len(sub.body) == 3
    kinds = [e.kind for e in sub.body]
    assert kinds == [ElementKind.DEMAND, ElementKind.FRICTION, ElementKind.STORAGE]


def test_duplicate_name_reports_second_line():
    deck = "FRICTION r1 1 0 b=1\nFRICTION r1 2 0 b=2\n"
    with pytest.raises(DuplicateNameError) as ei:
        parse(deck)
    assert ei.value.line == 2


def test_unknown_element():
    with pytest.raises(UnknownElementError) as ei:
        parse("WIDGET w 1 0 x=2\n")
    assert ei.value.line == 1


def test_malformed_parameter():
    with pytest.raises(MalformedParameterError):
        parse("FRICTION r1 1 0 b=banana\n")
    with pytest.raises(MalformedParameterError):
        parse("FRICTION r1 1 0 b=-2\n")
    with pytest.raises(MalformedParameterError):
        parse("DEMAND l1 1 0\n")


def test_engineering_suffixes():
    assert parse_number("2k") == 2000.0
    assert parse_number("3m") == pytest.approx(3e-3)
    assert parse_number("5u") == pytest.approx(5e-6)
    assert parse_number("1.5meg") == pytest.approx(1.5e6)
    assert parse_number("4e-2") == pytest.approx(0.04)


def test_continuation_and_comments():
    deck = "* a comment\nFRICTION r1 1 0\n+ b=2  ; inline comment\n"
    n = parse(deck)
    (e,) = n.top_instances
    assert e.param("b") == 2.0


def test_mutual_requires_positive_definite():
    with pytest.raises(MalformedParameterError):
        parse("MUTUAL m1 1 0 2 0 eps11=1 eps12=3 eps22=1\n")
    n = parse("MUTUAL m1 1 0 2 0 eps11=2 eps12=0.5 eps22=1\n")
    assert n.top_instances[0].param("eps12") == 0.5


def test_diode_ron_roff_ordering():
    with pytest.raises(MalformedParameterError):
        parse("DIODE d1 1 0 ron=10 roff=1\n")


def test_waveforms():
    w = Waveform("pulse", (0.0, 2.0, 1.0, 0.5))
    assert w.value_at(0.5) == 0.0
    assert w.value_at(1.2) == 2.0
    assert w.value_at(1.6) == 0.0
    pwl = Waveform("pwl", (0.0, 0.0, 1.0, 4.0, 2.0, 4.0))
    assert pwl.value_at(0.5) == pytest.approx(2.0)
    assert pwl.value_at(5.0) == 4.0
    ac = Waveform("ac", (2.0, 90.0))
    assert ac.ac_phasor() == pytest.approx(2j)
    assert ac.value_at(3.0) == 0.0


def test_pid_tf_parses():
    n = parse("AMMETER a1 1 0\nCCVS e1 2 0 sense=a1 tf=pid kp=2 ki=0.5 kd=0.1 wf=100\n")
    tf = n.top_instances[1].param("tf")
    assert tf.pid == (2.0, 0.5, 0.1, 100.0)
    s = 3j
    assert tf.func(s) == pytest.approx(2 + 0.5 / s + 0.1 * s * 100 / (s + 100))


def test_rational_tf_must_be_proper():
    with pytest.raises(MalformedParameterError):
        parse("AMMETER a1 1 0\nCCVS e1 2 0 sense=a1 tf=(0,0,1)/(1)\n")


def test_print_parse_roundtrip():
    n1 = parse(TRADER_DECK)
    n2 = parse(print_netlist(n1))
    assert n1 == n2


def test_roundtrip_with_all_elements():
    deck = """\
VSRC v1 1 0 SINE(0, 2, 12, 30)
FSRC i1 2 0 PWL(0, 0, 1, 3, 2, 0)
AMMETER am 1 2
VOLTMETER vm 2 0
DIODE d1 2 3 ron=1e-3 roff=1e6
PRODFET q1 3 4 0 mu=2 kth=1
NOISE nz 4 0 seed=42 amp=0.1
VCCS g1 4 0 ctrl+=2 ctrl-=0 gain=(0,1)/(1,1)
CCCS f1 3 0 sense=am gain=2
STORAGE c1 4 0 k=1 ic=0.5
.AC log 10 0.01 100
.OP
.PROBE I(am) V(2,0) Q(c1) P(4)
"""
    n1 = parse(deck)
    n2 = parse(print_netlist(n1))
    assert n1 == n2


# -- elaboration -------------------------------------------------------------

def test_elaborate_single_friction():
    flat = elaborate(parse("FSRC s 0 1 DC(1)\nFRICTION r1 1 0 b=1\n"))
    assert flat.n_nodes == 2  # ground + node 1
    assert len(flat.elements) == 2


def test_elaborate_trader_instance_names_mangled():
    flat = elaborate(parse(TRADER_DECK))
    names = {e.name for e in flat.elements}
    assert "xt1.l1" in names and "xt1.c1" in names
    # two instrumented ports -> four boundary ammeters
    assert len(flat.port_instruments) == 2
    assert "xt1._port0p" in names and "xt1._port1m" in names


def test_elaborate_without_instrumentation():
    flat = elaborate(parse(TRADER_DECK), instrument_ports=False)
    assert not flat.port_instruments
    assert all("_port" not in e.name for e in flat.elements)


def test_undefined_subckt():
    with pytest.raises(UndefinedSubcircuitError) as ei:
        elaborate(parse("Xa 1 0 nosuch\nFRICTION r 1 0 b=1\n"))
    assert "xa" in str(ei.value)


def test_recursive_subckt():
    deck = """\
.SUBCKT loop a b
  Xinner a b loop
  FRICTION r a b b=1
.ENDS
Xtop 1 0 loop
"""
    with pytest.raises(RecursiveSubcircuitError):
        elaborate(parse(deck))


def test_port_arity_mismatch():
    deck = """\
.SUBCKT two a b c d
  FRICTION r1 a b b=1
  FRICTION r2 c d b=1
.ENDS
Xbad 1 0 two
"""
    with pytest.raises(PortConnectionError):
        elaborate(parse(deck))


def test_unconnected_port_terminal():
    deck = """\
.SUBCKT bad a b c d
  FRICTION r1 a b b=1
.ENDS
"""
    with pytest.raises(PortConnectionError):
        parse(deck)


def test_missing_ground():
    with pytest.raises(MissingGroundError):
        elaborate(parse("FRICTION r1 1 2 b=1\nFRICTION r2 2 1 b=1\n"))


def test_floating_island():
    deck = "FRICTION r1 1 0 b=1\nFSRC s 0 1 DC(1)\nFRICTION r2 2 3 b=1\nFRICTION r3 3 2 b=1\n"
    with pytest.raises(FloatingNodeError):
        elaborate(parse(deck))


def test_single_terminal_node_needs_allowance():
    deck = "FSRC s 0 1 DC(1)\nFRICTION r1 1 0 b=1\nAMMETER a 1 2\n"
    with pytest.raises(FloatingNodeError):
        elaborate(parse(deck))
    flat = elaborate(parse(deck), allow_open={"2"})
    assert flat.n_nodes == 3


def test_probe_resolution_errors():
    deck = "FSRC s 0 1 DC(1)\nFRICTION r1 1 0 b=1\n.PROBE I(nosuch)\n"
    with pytest.raises(UnknownProbeError):
        elaborate(parse(deck))


def test_elaboration_deterministic():
    f1 = elaborate(parse(TRADER_DECK))
    f2 = elaborate(parse(TRADER_DECK))
    assert f1.node_index == f2.node_index
    assert [e.name for e in f1.elements] == [e.name for e in f2.elements]


def test_branch_assignment():
    flat = elaborate(parse(TRADER_DECK))
    demand_branches = [e.branch for e in flat.elements if e.kind is ElementKind.DEMAND]
    assert all(b >= 0 for b in demand_branches)
    total = sum(e.n_branches for e in flat.elements)
    assert flat.n_branches == total
