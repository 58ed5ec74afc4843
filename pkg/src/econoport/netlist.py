"""Line-oriented netlist dialect for economic multiport networks.

A deck declares elements with economic parameters (elasticities), wires them
by node names (node ``0`` is ground / the zero-desirability rail), groups
reusable agents into ``.SUBCKT`` blocks with paired port terminals, and lists
the analyses to run.  Statements, one per line (``+`` continues a line,
``*`` or ``;`` start comments, keywords and names are case-insensitive):

    DEMAND    <name> <n+> <n-> eps=<v> [ic=<flow0>]
    STORAGE   <name> <n+> <n-> k=<v> [ic=<incentive0>]
    FRICTION  <name> <n+> <n-> b=<v>
    MUTUAL    <name> <a+> <a-> <b+> <b-> eps11=<v> eps12=<v> eps22=<v>
    FSRC|VSRC <name> <n+> <n-> <waveform>
    AMMETER   <name> <n+> <n->          (zero-incentive series branch)
    VOLTMETER <name> <n+> <n->          (probe only, no stamp)
    CCVS <name> <out+> <out-> sense=<ammeter> tf=<tf>
    CCCS <name> <out+> <out-> sense=<ammeter> gain=<tf>
    VCVS <name> <out+> <out-> ctrl+=<node> ctrl-=<node> gain=<tf>
    VCCS <name> <out+> <out-> ctrl+=<node> ctrl-=<node> gain=<tf>
    DIODE <name> <n+> <n-> [ron=<v>] [roff=<v>]
    PRODFET <name> <drain> <gate> <source> mu=<v> kth=<v>
    NOISE <name> <n+> <n-> seed=<int> amp=<v>
    X<name> <nodes...> <subckt>
    .SUBCKT <name> <p1+ p1- [p2+ p2- ...]> ... .ENDS
    .TITLE <text> ; .OP ; .TRAN <tstep> <tstop> [method=trap|be] [ic=op|zero]
    .AC lin|log <n> <fstart> <fstop> ; .PROBE <probes...>

Waveforms: ``DC(v)`` (or a bare number), ``STEP(t0, level)``,
``PULSE(v1, v2, t0, width)``, ``SINE(offset, amp, freq[, phase_deg])``,
``PWL(t0, v0, t1, v1, ...)``, ``AC(mag[, phase_deg])``.
Transfer functions: a number, ``(n0,n1,...)/(d0,d1,...)`` with ascending
coefficients in s, or ``pid kp=<v> ki=<v> kd=<v> [wf=<v>]``.
Numbers accept engineering suffixes k, meg, m, u.

Probes: ``I(<element>)`` flow, ``V(<node>)`` / ``V(<a>,<b>)`` incentive,
``Q(<element>)`` integrated stock, ``P(<node>)`` integrated price.

Element parameters map onto the electrical analogs internally: a demand
element of elasticity eps is an inductance 1/eps, storage k a capacitance k,
friction b a conductance b.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field
from typing import Iterator, Sequence

from .rational import RationalFunction, rf
from .twoport import pid_policy


# ---------------------------------------------------------------------------
# errors
# ---------------------------------------------------------------------------

class NetlistError(Exception):
    """Base for all deck-processing errors; carries a source line when known."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.line = line
        self.col = col
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", col {col}" if col is not None else "") + ")"
        super().__init__(message + where)


class NetlistSyntaxError(NetlistError):
    """Malformed statement, unknown keyword, or bad token."""


class DuplicateNameError(NetlistError):
    """An element, instance, or subcircuit name reused within one scope."""


class UnknownElementError(NetlistSyntaxError):
    """Statement keyword is not an element or directive."""


class MalformedParameterError(NetlistError):
    """Parameter missing, unparsable, or violating its validity range."""


class ElaborationError(NetlistError):
    """Base for errors raised while flattening the hierarchy."""


class UndefinedSubcircuitError(ElaborationError):
    pass


class RecursiveSubcircuitError(ElaborationError):
    pass


class PortConnectionError(ElaborationError):
    pass


class MissingGroundError(ElaborationError):
    pass


class FloatingNodeError(ElaborationError):
    pass


class UnknownProbeError(ElaborationError):
    pass


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

class ElementKind(enum.Enum):
    DEMAND = "demand"
    STORAGE = "storage"
    FRICTION = "friction"
    MUTUAL = "mutual"
    FSRC = "fsrc"
    VSRC = "vsrc"
    AMMETER = "ammeter"
    VOLTMETER = "voltmeter"
    CCVS = "ccvs"
    CCCS = "cccs"
    VCVS = "vcvs"
    VCCS = "vccs"
    DIODE = "diode"
    PRODFET = "prodfet"
    NOISE = "noise"


@dataclass(frozen=True)
class Waveform:
    """Time shape of an independent source."""

    kind: str                # dc | step | pulse | sine | pwl | ac
    args: tuple[float, ...]

    def value_at(self, t: float) -> float:
        k, a = self.kind, self.args
        if k == "dc":
            return a[0]
        if k == "step":
            t0, level = a
            return level if t >= t0 else 0.0
        if k == "pulse":
            v1, v2, t0, width = a
            return v2 if t0 <= t < t0 + width else v1
        if k == "sine":
            offset, amp, freq, phase = a
            return offset + amp * math.sin(2.0 * math.pi * freq * t + math.radians(phase))
        if k == "pwl":
            pts = a
            if t <= pts[0]:
                return pts[1]
            for i in range(0, len(pts) - 2, 2):
                t0, v0, t1, v1 = pts[i], pts[i + 1], pts[i + 2], pts[i + 3]
                if t <= t1:
                    if t1 == t0:
                        return v1
                    return v0 + (v1 - v0) * (t - t0) / (t1 - t0)
            return pts[-1]
        if k == "ac":
            return 0.0
        raise ValueError(f"unknown waveform kind {k}")

    def dc_value(self) -> float:
        return self.value_at(0.0)

    def ac_phasor(self) -> complex:
        if self.kind != "ac":
            return 0.0 + 0.0j
        mag = self.args[0]
        phase = self.args[1] if len(self.args) > 1 else 0.0
        return mag * complex(math.cos(math.radians(phase)), math.sin(math.radians(phase)))

    def print_form(self) -> str:
        return f"{self.kind.upper()}({', '.join(_fmt(x) for x in self.args)})"


@dataclass(frozen=True)
class TransferFunction:
    """Rational gain H(s) of a controlled source, possibly given as a PID law."""

    func: RationalFunction
    pid: tuple[float, float, float, float] | None = None  # (kp, ki, kd, wf)

    def print_form(self) -> str:
        if self.pid is not None:
            kp, ki, kd, wf = self.pid
            return f"pid kp={_fmt(kp)} ki={_fmt(ki)} kd={_fmt(kd)} wf={_fmt(wf)}"
        num = ",".join(_fmt(c) for c in self.func.num.coeffs) or "0"
        den = ",".join(_fmt(c) for c in self.func.den.coeffs)
        return f"({num})/({den})"


@dataclass(frozen=True)
class ElementDecl:
    kind: ElementKind
    name: str
    nodes: tuple[str, ...]
    params: tuple[tuple[str, object], ...]  # sorted key/value pairs
    line: int = 0

    def param(self, key: str, default=None):
        for k, v in self.params:
            if k == key:
                return v
        return default


@dataclass(frozen=True)
class Instance:
    name: str
    nodes: tuple[str, ...]
    subckt: str
    line: int = 0


@dataclass(frozen=True)
class SubcktDef:
    name: str
    ports: tuple[tuple[str, str], ...]  # (+, -) terminal pairs
    body: tuple["ElementDecl | Instance", ...]
    line: int = 0


@dataclass(frozen=True)
class AnalysisDirective:
    kind: str  # op | tran | ac
    params: tuple[tuple[str, object], ...] = ()
    probes: tuple[str, ...] = ()
    line: int = 0

    def param(self, key: str, default=None):
        for k, v in self.params:
            if k == key:
                return v
        return default


@dataclass(frozen=True)
class Netlist:
    title: str = ""
    subckt_defs: tuple[SubcktDef, ...] = ()
    top_instances: tuple["ElementDecl | Instance", ...] = ()
    directives: tuple[AnalysisDirective, ...] = ()
    probes: tuple[str, ...] = ()

    def subckt(self, name: str) -> SubcktDef | None:
        for d in self.subckt_defs:
            if d.name == name:
                return d
        return None


# ---------------------------------------------------------------------------
# number / token helpers
# ---------------------------------------------------------------------------

_SUFFIX = {"k": 1e3, "meg": 1e6, "m": 1e-3, "u": 1e-6}
_NUM_RE = re.compile(r"^([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)(meg|k|m|u)?$", re.IGNORECASE)


def parse_number(tok: str, line: int | None = None) -> float:
    m = _NUM_RE.match(tok.strip())
    if not m:
        raise MalformedParameterError(f"not a number: {tok!r}", line)
    val = float(m.group(1))
    if m.group(2):
        val *= _SUFFIX[m.group(2).lower()]
    return val


def _fmt(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


_NAME_RE = re.compile(r"^[a-z0-9_][a-z0-9_.+-]*$")


def _check_name(tok: str, what: str, line: int) -> str:
    tok = tok.lower()
    if not _NAME_RE.match(tok):
        raise NetlistSyntaxError(f"invalid {what} name {tok!r}", line)
    return tok


def _tokenize(text: str, line: int) -> list[str]:
    """Split a logical line into tokens, keeping parenthesized groups whole."""
    toks: list[str] = []
    i, n = 0, len(text)
    while i < n:
        if text[i].isspace():
            i += 1
            continue
        start = i
        depth = 0
        while i < n:
            c = text[i]
            if c == "(":
                depth += 1
            elif c == ")":
                depth -= 1
                if depth < 0:
                    raise NetlistSyntaxError("unbalanced ')'", line, i + 1)
            elif c.isspace() and depth == 0:
                break
            i += 1
        if depth != 0:
            raise NetlistSyntaxError("unbalanced '('", line, start + 1)
        toks.append(text[start:i])
    return toks


def _split_kv(tok: str) -> tuple[str, str] | None:
    depth = 0
    for i, c in enumerate(tok):
        if c == "(":
            depth += 1
        elif c == ")":
            depth -= 1
        elif c == "=" and depth == 0:
            return tok[:i].lower(), tok[i + 1:]
    return None


def _parse_tf(value: str, rest: dict[str, str], line: int) -> TransferFunction:
    value = value.strip()
    if value.lower() == "pid":
        kp = parse_number(rest.pop("kp", "0"), line)
        ki = parse_number(rest.pop("ki", "0"), line)
        kd = parse_number(rest.pop("kd", "0"), line)
        wf = parse_number(rest.pop("wf", "1000"), line)
        if wf <= 0:
            raise MalformedParameterError("pid wf must be positive", line)
        return TransferFunction(pid_policy(kp, ki, kd, wf), (kp, ki, kd, wf))
    m = re.match(r"^\(([^()]*)\)/\(([^()]*)\)$", value)
    if m:
        try:
            num = [parse_number(c, line) for c in m.group(1).split(",") if c.strip()]
            den = [parse_number(c, line) for c in m.group(2).split(",") if c.strip()]
        except MalformedParameterError:
            raise MalformedParameterError(f"bad rational coefficients in {value!r}", line)
        if not den or all(c == 0 for c in den):
            raise MalformedParameterError("rational transfer function needs a nonzero denominator", line)
        func = rf(num, den)
        if func.num.degree > func.den.degree:
            raise MalformedParameterError("transfer function must be proper (num degree <= den degree)", line)
        return TransferFunction(func)
    try:
        return TransferFunction(rf([parse_number(value, line)]))
    except MalformedParameterError:
        raise MalformedParameterError(f"bad transfer function {value!r}", line)


_WAVE_ARITY = {"dc": (1, 1), "step": (2, 2), "pulse": (4, 4), "sine": (3, 4), "ac": (1, 2), "pwl": (2, 512)}


def _parse_waveform(tok: str, line: int) -> Waveform:
    m = re.match(r"^([a-z]+)\((.*)\)$", tok.strip(), re.IGNORECASE)
    if m:
        kind = m.group(1).lower()
        if kind not in _WAVE_ARITY:
            raise MalformedParameterError(f"unknown waveform {kind!r}", line)
        args = tuple(parse_number(c, line) for c in m.group(2).split(",") if c.strip())
        lo, hi = _WAVE_ARITY[kind]
        if not (lo <= len(args) <= hi):
            raise MalformedParameterError(f"waveform {kind.upper()} takes {lo}..{hi} args, got {len(args)}", line)
        if kind == "sine" and len(args) == 3:
            args = args + (0.0,)
        if kind == "pwl":
            if len(args) % 2:
                raise MalformedParameterError("PWL needs an even number of args (t,v pairs)", line)
            ts = args[::2]
            if any(t1 < t0 for t0, t1 in zip(ts, ts[1:])):
                raise MalformedParameterError("PWL times must be nondecreasing", line)
        return Waveform(kind, args)
    return Waveform("dc", (parse_number(tok, line),))


# ---------------------------------------------------------------------------
# statement parsers
# ---------------------------------------------------------------------------

def _logical_lines(text: str) -> Iterator[tuple[int, str]]:
    """Join continuation lines; yield (first physical line number, content)."""
    current: str | None = None
    current_line = 0
    for ln, raw in enumerate(text.splitlines(), start=1):
        body = raw.split(";", 1)[0]
        stripped = body.strip()
        if stripped.startswith("*"):
            stripped = ""
        if stripped.startswith("+"):
            if current is None:
                raise NetlistSyntaxError("continuation line with nothing to continue", ln)
            current += " " + stripped[1:].strip()
            continue
        if current is not None:
            yield current_line, current
        current, current_line = (stripped, ln) if stripped else (None, 0)
    if current is not None:
        yield current_line, current


def _kv_map(tokens: Sequence[str], line: int) -> dict[str, str]:
    out: dict[str, str] = {}
    for tok in tokens:
        kv = _split_kv(tok)
        if kv is None:
            raise NetlistSyntaxError(f"expected key=value, got {tok!r}", line)
        if kv[0] in out:
            raise MalformedParameterError(f"parameter {kv[0]!r} given twice", line)
        out[kv[0]] = kv[1]
    return out


def _need(kv: dict[str, str], key: str, what: str, line: int) -> str:
    if key not in kv:
        raise MalformedParameterError(f"{what} requires {key}=", line)
    return kv.pop(key)


def _no_extra(kv: dict[str, str], line: int) -> None:
    if kv:
        raise MalformedParameterError(f"unknown parameter(s): {', '.join(sorted(kv))}", line)


def _positive(val: float, key: str, line: int) -> float:
    if not (val > 0) or not math.isfinite(val):
        raise MalformedParameterError(f"{key} must be positive and finite, got {val}", line)
    return val


def _parse_element(keyword: str, toks: list[str], line: int) -> ElementDecl:
    kind = ElementKind(keyword)
    two_node = {ElementKind.DEMAND, ElementKind.STORAGE, ElementKind.FRICTION,
                ElementKind.FSRC, ElementKind.VSRC, ElementKind.AMMETER,
                ElementKind.VOLTMETER, ElementKind.DIODE, ElementKind.NOISE,
                ElementKind.CCVS, ElementKind.CCCS, ElementKind.VCVS, ElementKind.VCCS}
    n_nodes = 2 if kind in two_node else (4 if kind is ElementKind.MUTUAL else 3)
    if len(toks) < 1 + n_nodes:
        raise NetlistSyntaxError(f"{keyword.upper()} needs a name and {n_nodes} nodes", line)
    name = _check_name(toks[0], "element", line)
    nodes = tuple(_check_name(t, "node", line) for t in toks[1:1 + n_nodes])
    rest = toks[1 + n_nodes:]
    params: dict[str, object] = {}

    if kind in (ElementKind.FSRC, ElementKind.VSRC):
        if len(rest) != 1:
            raise MalformedParameterError(f"{keyword.upper()} needs exactly one waveform", line)
        params["wave"] = _parse_waveform(rest[0], line)
    elif kind is ElementKind.DEMAND:
        kv = _kv_map(rest, line)
        params["eps"] = _positive(parse_number(_need(kv, "eps", "DEMAND", line), line), "eps", line)
        if "ic" in kv:
            params["ic"] = parse_number(kv.pop("ic"), line)
        _no_extra(kv, line)
    elif kind is ElementKind.STORAGE:
        kv = _kv_map(rest, line)
        params["k"] = _positive(parse_number(_need(kv, "k", "STORAGE", line), line), "k", line)
        if "ic" in kv:
            params["ic"] = parse_number(kv.pop("ic"), line)
        _no_extra(kv, line)
    elif kind is ElementKind.FRICTION:
        kv = _kv_map(rest, line)
        params["b"] = _positive(parse_number(_need(kv, "b", "FRICTION", line), line), "b", line)
        _no_extra(kv, line)
    elif kind is ElementKind.MUTUAL:
        kv = _kv_map(rest, line)
        e11 = parse_number(_need(kv, "eps11", "MUTUAL", line), line)
        e12 = parse_number(_need(kv, "eps12", "MUTUAL", line), line)
        e22 = parse_number(_need(kv, "eps22", "MUTUAL", line), line)
        _no_extra(kv, line)
        # elasticity matrix must be symmetric positive definite
        if e11 <= 0 or e22 <= 0 or e11 * e22 - e12 * e12 <= 0:
            raise MalformedParameterError(
                f"mutual elasticity matrix [[{e11},{e12}],[{e12},{e22}]] is not positive definite", line)
        params.update(eps11=e11, eps12=e12, eps22=e22)
    elif kind in (ElementKind.AMMETER, ElementKind.VOLTMETER):
        if rest:
            raise MalformedParameterError(f"{keyword.upper()} takes no parameters", line)
    elif kind is ElementKind.CCVS:
        kv = _kv_map(rest, line)
        params["sense"] = _check_name(_need(kv, "sense", "CCVS", line), "sense", line)
        params["tf"] = _parse_tf(_need(kv, "tf", "CCVS", line), kv, line)
        _no_extra(kv, line)
    elif kind is ElementKind.CCCS:
        kv = _kv_map(rest, line)
        params["sense"] = _check_name(_need(kv, "sense", "CCCS", line), "sense", line)
        params["tf"] = _parse_tf(_need(kv, "gain", "CCCS", line), kv, line)
        _no_extra(kv, line)
    elif kind in (ElementKind.VCVS, ElementKind.VCCS):
        kv = _kv_map(rest, line)
        params["ctrl_p"] = _check_name(_need(kv, "ctrl+", keyword.upper(), line), "node", line)
        params["ctrl_m"] = _check_name(_need(kv, "ctrl-", keyword.upper(), line), "node", line)
        params["tf"] = _parse_tf(_need(kv, "gain", keyword.upper(), line), kv, line)
        _no_extra(kv, line)
    elif kind is ElementKind.DIODE:
        kv = _kv_map(rest, line)
        ron = parse_number(kv.pop("ron", "1e-6"), line)
        roff = parse_number(kv.pop("roff", "1e9"), line)
        _no_extra(kv, line)
        if not (0 < ron < roff):
            raise MalformedParameterError(f"diode needs 0 < ron < roff, got ron={ron} roff={roff}", line)
        params.update(ron=ron, roff=roff)
    elif kind is ElementKind.PRODFET:
        kv = _kv_map(rest, line)
        params["mu"] = _positive(parse_number(_need(kv, "mu", "PRODFET", line), line), "mu", line)
        params["kth"] = parse_number(_need(kv, "kth", "PRODFET", line), line)
        _no_extra(kv, line)
    elif kind is ElementKind.NOISE:
        kv = _kv_map(rest, line)
        seed = parse_number(_need(kv, "seed", "NOISE", line), line)
        if seed != int(seed) or not (0 <= seed < 2 ** 64):
            raise MalformedParameterError("noise seed must be a 64-bit unsigned integer", line)
        params["seed"] = int(seed)
        amp = parse_number(_need(kv, "amp", "NOISE", line), line)
        if amp < 0:
            raise MalformedParameterError("noise amp must be nonnegative", line)
        params["amp"] = amp
        _no_extra(kv, line)

    return ElementDecl(kind, name, nodes, tuple(sorted(params.items())), line)


_KEYWORDS = {k.value for k in ElementKind}


def parse(text: str) -> Netlist:
    """Parse deck text into a Netlist; raises NetlistError subclasses."""
    title = ""
    subckts: list[SubcktDef] = []
    top: list[ElementDecl | Instance] = []
    directives: list[AnalysisDirective] = []
    probes: list[str] = []

    current_sub: tuple[str, tuple[tuple[str, str], ...], int] | None = None
    sub_body: list[ElementDecl | Instance] = []
    scope_names: set[str] = set()
    top_names: set[str] = set()
    subckt_names: set[str] = set()

    def finish_sub():
        nonlocal current_sub
        name, ports, line = current_sub
        body = tuple(sub_body)
        port_terms = [t for pair in ports for t in pair]
        connected = {n for item in body for n in _item_nodes(item)}
        for t in port_terms:
            if t not in connected:
                raise PortConnectionError(f"port terminal {t!r} of subckt {name!r} is not connected in its body", line)
        subckts.append(SubcktDef(name, ports, body, line))
        current_sub = None
        sub_body.clear()

    for line, content in _logical_lines(text):
        toks = _tokenize(content, line)
        if not toks:
            continue
        head = toks[0].lower()

        if head.startswith("."):
            word = head[1:]
            if word == "title":
                title = content.split(None, 1)[1] if len(content.split(None, 1)) > 1 else ""
            elif word == "subckt":
                if current_sub is not None:
                    raise NetlistSyntaxError("nested .SUBCKT is not allowed", line)
                if len(toks) < 4 or len(toks) % 2 != 0:
                    raise NetlistSyntaxError(".SUBCKT needs a name and one or more port terminal pairs", line)
                name = _check_name(toks[1], "subckt", line)
                if name in subckt_names:
                    raise DuplicateNameError(f"subckt {name!r} already defined", line)
                subckt_names.add(name)
                terms = [_check_name(t, "port terminal", line) for t in toks[2:]]
                if len(set(terms)) != len(terms):
                    raise PortConnectionError("port terminal pairs must be disjoint", line)
                ports = tuple((terms[i], terms[i + 1]) for i in range(0, len(terms), 2))
                current_sub = (name, ports, line)
                scope_names = set()
            elif word == "ends":
                if current_sub is None:
                    raise NetlistSyntaxError(".ENDS without .SUBCKT", line)
                finish_sub()
                scope_names = set()
            elif word == "op":
                directives.append(AnalysisDirective("op", (), (), line))
            elif word == "tran":
                if len(toks) < 3:
                    raise NetlistSyntaxError(".TRAN needs tstep and tstop", line)
                tstep = parse_number(toks[1], line)
                tstop = parse_number(toks[2], line)
                kv = _kv_map(toks[3:], line)
                method = kv.pop("method", "trap").lower()
                ic = kv.pop("ic", "op").lower()
                _no_extra(kv, line)
                if method not in ("trap", "be"):
                    raise MalformedParameterError(f"method must be trap or be, got {method!r}", line)
                if ic not in ("op", "zero"):
                    raise MalformedParameterError(f"ic must be op or zero, got {ic!r}", line)
                if not (0 < tstep < tstop):
                    raise MalformedParameterError("need 0 < tstep < tstop", line)
                directives.append(AnalysisDirective(
                    "tran", (("ic", ic), ("method", method), ("tstep", tstep), ("tstop", tstop)), (), line))
            elif word == "ac":
                if len(toks) != 5:
                    raise NetlistSyntaxError(".AC needs grid, n, fstart, fstop", line)
                grid = toks[1].lower()
                if grid not in ("lin", "log"):
                    raise MalformedParameterError(f"grid must be lin or log, got {grid!r}", line)
                n = parse_number(toks[2], line)
                fstart = parse_number(toks[3], line)
                fstop = parse_number(toks[4], line)
                if n != int(n) or int(n) < 2:
                    raise MalformedParameterError("n_points must be an integer >= 2", line)
                if not (0 < fstart < fstop) and grid == "log":
                    raise MalformedParameterError("need 0 < fstart < fstop", line)
                if not (fstart < fstop):
                    raise MalformedParameterError("need fstart < fstop", line)
                directives.append(AnalysisDirective(
                    "ac", (("fstart", fstart), ("fstop", fstop), ("grid", grid), ("n", int(n))), (), line))
            elif word == "probe":
                probes.extend(t.lower() for t in toks[1:])
            else:
                raise UnknownElementError(f"unknown directive .{word.upper()}", line)
            continue

        if head.startswith("x") and head not in _KEYWORDS:
            name = _check_name(toks[0], "instance", line)
            if len(toks) < 3:
                raise NetlistSyntaxError("instance needs nodes and a subckt name", line)
            nodes = tuple(_check_name(t, "node", line) for t in toks[1:-1])
            sub = _check_name(toks[-1], "subckt", line)
            item: ElementDecl | Instance = Instance(name, nodes, sub, line)
        elif head in _KEYWORDS:
            item = _parse_element(head, toks[1:], line)
            name = item.name
        else:
            raise UnknownElementError(f"unknown element kind {head.upper()!r}", line)

        names = scope_names if current_sub is not None else top_names
        if name in names:
            raise DuplicateNameError(f"name {name!r} already declared in this scope", line)
        names.add(name)
        (sub_body if current_sub is not None else top).append(item)

    if current_sub is not None:
        raise NetlistSyntaxError(f".SUBCKT {current_sub[0]!r} is missing .ENDS", current_sub[2])

    return Netlist(title, tuple(subckts), tuple(top), tuple(directives), tuple(probes))


def _item_nodes(item: "ElementDecl | Instance") -> tuple[str, ...]:
    if isinstance(item, Instance):
        return item.nodes
    nodes = item.nodes
    if item.kind in (ElementKind.VCVS, ElementKind.VCCS):
        nodes = nodes + (item.param("ctrl_p"), item.param("ctrl_m"))
    return nodes


# ---------------------------------------------------------------------------
# printing (canonical form; print-parse round-trips structurally)
# ---------------------------------------------------------------------------

def _print_element(e: ElementDecl) -> str:
    parts = [e.kind.value.upper(), e.name, *e.nodes]
    for key, val in e.params:
        if key == "wave":
            parts.append(val.print_form())
        elif key == "tf":
            label = "tf" if e.kind is ElementKind.CCVS else "gain"
            parts.append(f"{label}={val.print_form()}")
        elif key == "ctrl_p":
            parts.append(f"ctrl+={val}")
        elif key == "ctrl_m":
            parts.append(f"ctrl-={val}")
        elif key == "sense":
            parts.append(f"sense={val}")
        else:
            parts.append(f"{key}={_fmt(val)}")
    return " ".join(parts)


def print_netlist(n: Netlist) -> str:
    """Render a Netlist back to canonical deck text."""
    out: list[str] = []
    if n.title:
        out.append(f".TITLE {n.title}")
    for sub in n.subckt_defs:
        terms = " ".join(t for pair in sub.ports for t in pair)
        out.append(f".SUBCKT {sub.name} {terms}")
        for item in sub.body:
            if isinstance(item, Instance):
                out.append(f"  {item.name} {' '.join(item.nodes)} {item.subckt}")
            else:
                out.append("  " + _print_element(item))
        out.append(".ENDS")
    for item in n.top_instances:
        if isinstance(item, Instance):
            out.append(f"{item.name} {' '.join(item.nodes)} {item.subckt}")
        else:
            out.append(_print_element(item))
    for d in n.directives:
        if d.kind == "op":
            out.append(".OP")
        elif d.kind == "tran":
            out.append(f".TRAN {_fmt(d.param('tstep'))} {_fmt(d.param('tstop'))} "
                       f"method={d.param('method')} ic={d.param('ic')}")
        elif d.kind == "ac":
            out.append(f".AC {d.param('grid')} {d.param('n')} {_fmt(d.param('fstart'))} {_fmt(d.param('fstop'))}")
    if n.probes:
        out.append(".PROBE " + " ".join(n.probes))
    return "\n".join(out) + ("\n" if out else "")


# ---------------------------------------------------------------------------
# elaboration
# ---------------------------------------------------------------------------

GROUND = "0"


@dataclass(frozen=True)
class FlatElement:
    kind: ElementKind
    name: str
    nodes: tuple[int, ...]
    params: dict
    branch: int = -1       # first branch-flow unknown; -1 when none
    n_branches: int = 0


@dataclass(frozen=True)
class PortInstrument:
    """Paired boundary ammeters of one instance port, both oriented into the
    instance: equal flows mean the port condition holds."""

    instance: str
    port_index: int
    amm_in: str   # outer+ -> inner+
    amm_out: str  # inner- -> outer-


@dataclass
class FlatCircuit:
    node_index: dict[str, int]          # ground "0" -> 0
    elements: list[FlatElement]
    probes: tuple[str, ...]
    port_instruments: list[PortInstrument]
    n_branches: int
    by_name: dict[str, FlatElement] = field(default_factory=dict)

    @property
    def n_nodes(self) -> int:
        return len(self.node_index)

    def element(self, name: str) -> FlatElement:
        e = self.by_name.get(name)
        if e is None:
            raise UnknownProbeError(f"no element named {name!r} in the elaborated circuit")
        return e


_BRANCHY = {ElementKind.DEMAND: 1, ElementKind.VSRC: 1, ElementKind.AMMETER: 1,
            ElementKind.CCVS: 1, ElementKind.VCVS: 1, ElementKind.MUTUAL: 2}


class _Elaborator:
    def __init__(self, netlist: Netlist, instrument_ports: bool, allow_open: frozenset[str]):
        self.netlist = netlist
        self.instrument = instrument_ports
        self.allow_open = {a.lower() for a in allow_open}
        self.node_index: dict[str, int] = {GROUND: 0}
        self.elements: list[FlatElement] = []
        self.instruments: list[PortInstrument] = []
        self.n_branches = 0
        self.node_degree: dict[int, int] = {}

    def node(self, name: str) -> int:
        if name not in self.node_index:
            self.node_index[name] = len(self.node_index)
        return self.node_index[name]

    def add_element(self, kind: ElementKind, name: str, nodes: tuple[int, ...], params: dict, line: int):
        nb = _BRANCHY.get(kind, 0)
        branch = -1
        if nb:
            branch = self.n_branches
            self.n_branches += nb
        self.elements.append(FlatElement(kind, name, nodes, params, branch, nb))
        for idx in set(nodes):
            self.node_degree[idx] = self.node_degree.get(idx, 0) + 1

    def expand(self, items: Sequence[ElementDecl | Instance], prefix: str,
               node_map: dict[str, str], stack: tuple[str, ...]):
        for item in items:
            if isinstance(item, Instance):
                self.expand_instance(item, prefix, node_map, stack)
                continue
            e = item
            name = prefix + e.name
            mapped = tuple(self.node(self._map_node(n, prefix, node_map)) for n in e.nodes)
            params = dict(e.params)
            if e.kind in (ElementKind.VCVS, ElementKind.VCCS):
                params["ctrl_p_idx"] = self.node(self._map_node(params["ctrl_p"], prefix, node_map))
                params["ctrl_m_idx"] = self.node(self._map_node(params["ctrl_m"], prefix, node_map))
            if e.kind in (ElementKind.CCVS, ElementKind.CCCS):
                params["sense_flat"] = prefix + params["sense"]
            self.add_element(e.kind, name, mapped, params, e.line)

    @staticmethod
    def _map_node(n: str, prefix: str, node_map: dict[str, str]) -> str:
        if n == GROUND:
            return GROUND
        if n in node_map:
            return node_map[n]
        return prefix + n

    def expand_instance(self, inst: Instance, prefix: str, node_map: dict[str, str], stack: tuple[str, ...]):
        sub = self.netlist.subckt(inst.subckt)
        if sub is None:
            raise UndefinedSubcircuitError(
                f"instance {prefix + inst.name!r} references undefined subckt {inst.subckt!r}", inst.line)
        if inst.subckt in stack:
            raise RecursiveSubcircuitError(
                f"recursive instantiation of subckt {inst.subckt!r} via {prefix + inst.name!r}", inst.line)
        n_terms = 2 * len(sub.ports)
        if len(inst.nodes) != n_terms:
            raise PortConnectionError(
                f"instance {prefix + inst.name!r} connects {len(inst.nodes)} nodes; "
                f"subckt {sub.name!r} has {n_terms} port terminals", inst.line)
        inst_prefix = prefix + inst.name + "."
        inner_map: dict[str, str] = {}
        for pi, (tp, tm) in enumerate(sub.ports):
            outer_p = self._map_node(inst.nodes[2 * pi], prefix, node_map)
            outer_m = self._map_node(inst.nodes[2 * pi + 1], prefix, node_map)
            if self.instrument:
                inner_p = inst_prefix + tp
                inner_m = inst_prefix + tm
                amm_in = f"{inst_prefix}_port{pi}p"
                amm_out = f"{inst_prefix}_port{pi}m"
                self.add_element(ElementKind.AMMETER, amm_in,
                                 (self.node(outer_p), self.node(inner_p)), {}, inst.line)
                self.add_element(ElementKind.AMMETER, amm_out,
                                 (self.node(inner_m), self.node(outer_m)), {}, inst.line)
                self.instruments.append(PortInstrument(prefix + inst.name, pi, amm_in, amm_out))
                inner_map[tp] = inner_p
                inner_map[tm] = inner_m
            else:
                inner_map[tp] = outer_p
                inner_map[tm] = outer_m
        self.expand(sub.body, inst_prefix, inner_map, stack + (inst.subckt,))

    def check_topology(self):
        if len(self.node_index) <= 1 and not self.elements:
            return
        # galvanic reachability from ground
        adj: dict[int, set[int]] = {i: set() for i in self.node_index.values()}
        for e in self.elements:
            conn = e.nodes
            if e.kind is ElementKind.MUTUAL:
                pairs = [(conn[0], conn[1]), (conn[2], conn[3])]
            elif e.kind is ElementKind.VOLTMETER:
                pairs = []
            elif e.kind is ElementKind.PRODFET:
                pairs = [(conn[0], conn[2]), (conn[1], conn[2])]
            else:
                pairs = [(conn[0], conn[1])]
            for a, b in pairs:
                adj[a].add(b)
                adj[b].add(a)
        seen = {0}
        frontier = [0]
        while frontier:
            cur = frontier.pop()
            for nxt in adj.get(cur, ()):
                if nxt not in seen:
                    seen.add(nxt)
                    frontier.append(nxt)
        unreachable = [name for name, idx in self.node_index.items() if idx not in seen]
        if unreachable:
            if len(seen) == 1 and len(self.node_index) > 1:
                raise MissingGroundError(
                    f"no element connects to ground; floating nodes: {', '.join(sorted(unreachable)[:6])}")
            raise FloatingNodeError(
                f"nodes not galvanically reachable from ground: {', '.join(sorted(unreachable)[:6])}")
        # degree check (open-circuit nodes need explicit allowance)
        rev = {idx: name for name, idx in self.node_index.items()}
        for idx, deg in self.node_degree.items():
            if idx == 0:
                continue
            if deg < 2 and rev[idx] not in self.allow_open:
                raise FloatingNodeError(f"node {rev[idx]!r} has a single element terminal "
                                        "(pass allow_open to permit open ports)")


_PROBE_RE = re.compile(r"^([ivqp])\(([^(),]+)(?:,([^(),]+))?\)$")


def parse_probe(text: str) -> tuple[str, str, str | None]:
    m = _PROBE_RE.match(text.strip().lower())
    if not m:
        raise UnknownProbeError(f"bad probe syntax {text!r} (use I(elem), V(node), V(a,b), Q(elem), P(node))")
    return m.group(1), m.group(2), m.group(3)


def elaborate(netlist: Netlist, instrument_ports: bool = True,
              allow_open: frozenset[str] | set[str] = frozenset()) -> FlatCircuit:
    """Flatten the hierarchy into an element graph with indexed nodes.

    Instance ports are joined through paired boundary ammeters by default, so
    the port condition of every instance is observable in any analysis.
    """
    el = _Elaborator(netlist, instrument_ports, frozenset(allow_open))
    el.expand(netlist.top_instances, "", {}, ())
    el.check_topology()
    flat = FlatCircuit(el.node_index, el.elements, netlist.probes, el.instruments, el.n_branches)
    flat.by_name = {e.name: e for e in flat.elements}
    for p in netlist.probes:
        kind, target, second = parse_probe(p)
        if kind in ("i", "q"):
            flat.element(target)
        else:
            if target not in flat.node_index:
                raise UnknownProbeError(f"probe {p!r}: no node named {target!r}")
            if second is not None and second not in flat.node_index:
                raise UnknownProbeError(f"probe {p!r}: no node named {second!r}")
    return flat
