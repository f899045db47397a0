"""Algebraic side of verification.

Measures (angles, lengths, arcs, ...) become real-valued solver symbols.
Equalities from the problem and from applied theorems become constraints,
which are emitted as SMT-LIB2 text over the ``QF_NRA`` logic and handed to a
solver backend.  :meth:`AlgebraSession.check_goal` decides whether the
constraints pin the goal to the claimed value.

Trigonometric terms are opaque placeholder symbols linked to their angle by
exact values at the standard angles and by ``sin^2 + cos^2 = 1``.  Inverse
trigonometric functions are rejected.
"""

from __future__ import annotations

import math
import os
import shutil
import subprocess
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from fractions import Fraction
from typing import Iterable, Mapping

import mpmath

from geoproof import grammar
from geoproof.cdl import Ident, Node, Num, Term, render
from geoproof.state import canonicalize

DEFAULT_TIMEOUT_MS = 10_000
DEFAULT_EPS = Fraction(1, 10**6)
SOLVER_ENV = "GEOPROOF_SMT_SOLVER"
BACKEND_ENV = "GEOPROOF_SMT_BACKEND"


class UnsupportedMeasure(ValueError):
    pass


class InverseTrigUnsupported(UnsupportedMeasure):
    """Raised for ArcSin/ArcCos/ArcTan, which the solver cannot reason about."""


class BackendUnavailable(RuntimeError):
    pass


class SolverTimeout(RuntimeError):
    def __init__(self, budget_ms: int):
        self.budget_ms = budget_ms
        super().__init__(f"solver could not decide within {budget_ms} ms")


# symbol table ---------------------------------------------------------------

_ANGLE_KINDS = {"ma"}
_DISPLAY = {
    "ma": "∠{}",
    "ll": "|{}|",
    "mar": "arc({})",
    "la": "len_arc({})",
    "rc": "r({})",
    "dc": "d({})",
    "pt": "P(△{})",
    "at": "S(△{})",
    "pq": "P(□{})",
    "aq": "S(□{})",
    "pc": "C(⊙{})",
    "ac": "S(⊙{})",
}
_UPPER_BOUND = {"ma": Fraction(180), "mar": Fraction(360)}


@dataclass
class SymbolTable:
    symbols: dict[Node, str] = field(default_factory=dict)
    terms: dict[str, Node] = field(default_factory=dict)
    kinds: dict[str, str] = field(default_factory=dict)
    known_values: dict[str, Fraction] = field(default_factory=dict)

    def lookup(self, measure: Node) -> str | None:
        return self.symbols.get(canonicalize(measure))

    def display(self, symbol: str) -> str:
        kind = self.kinds.get(symbol, "free")
        term = self.terms.get(symbol)
        if kind in _DISPLAY and isinstance(term, Term):
            return _DISPLAY[kind].format(term.args[0].name)
        if kind in ("sin", "cos", "tan") and isinstance(term, Term):
            return f"{kind}({_display_node(term.args[0], self)})"
        if kind == "sqrt" and isinstance(term, Term):
            return f"√({_display_node(term.args[0], self)})"
        return symbol


@dataclass(frozen=True)
class Constraint:
    """A relation between two CDL expressions, e.g. ``=``, ``<=``, ``>``."""

    op: str
    lhs: Node
    rhs: Node
    origin: object = None


@dataclass(frozen=True)
class Encoded:
    smt: str
    text: str
    symbols: frozenset[str]
    origin: object = None


@dataclass(frozen=True)
class Entailment:
    """Outcome of :meth:`AlgebraSession.check_goal`.

    ``kind`` is one of ``INCONSISTENT``, ``UNDERCONSTRAINED``,
    ``UNIQUE_MISMATCH`` or ``ENTAILED``.  ``values`` carries the two distinct
    goal witnesses of an underconstrained system or the single derived value
    of a mismatch.
    """

    kind: str
    values: tuple[Fraction, ...] = ()

    INCONSISTENT = "inconsistent"
    UNDERCONSTRAINED = "underconstrained"
    UNIQUE_MISMATCH = "unique_mismatch"
    ENTAILED = "entailed"

    @property
    def entailed(self) -> bool:
        return self.kind == self.ENTAILED


# numbers --------------------------------------------------------------------


def smt_number(value: Fraction) -> str:
    value = Fraction(value)
    num, den = abs(value.numerator), value.denominator
    body = f"{num}.0" if den == 1 else f"(/ {num}.0 {den}.0)"
    return f"(- {body})" if value < 0 else body


def exact_value(node: Node) -> Fraction | None:
    """Exact rational value of a closed arithmetic expression, if it has one."""
    if isinstance(node, Num):
        return node.value
    if not isinstance(node, Term):
        return None
    vals = [exact_value(a) for a in node.args]
    if any(v is None for v in vals):
        if node.head == "Sqrt" or (node.head == "Pow" and len(vals) == 2):
            pass
        else:
            return None
    h = node.head
    try:
        if h == "Add":
            return sum(vals, Fraction(0))
        if h == "Sub":
            return vals[0] - vals[1]
        if h == "Mul":
            out = Fraction(1)
            for v in vals:
                out *= v
            return out
        if h == "Div":
            return vals[0] / vals[1]
        if h == "Neg":
            return -vals[0]
        if h == "Pow":
            base, exp = vals
            if base is None or exp is None:
                return None
            if exp.denominator == 1:
                return base ** exp.numerator
            if exp == Fraction(1, 2):
                return _exact_sqrt(base)
            return None
        if h == "Sqrt":
            return None if vals[0] is None else _exact_sqrt(vals[0])
    except ZeroDivisionError:
        return None
    return None


def _exact_sqrt(v: Fraction) -> Fraction | None:
    if v < 0:
        return None
    n, d = math.isqrt(v.numerator), math.isqrt(v.denominator)
    if n * n == v.numerator and d * d == v.denominator:
        return Fraction(n, d)
    return None


def numeric_value(node: Node, prec: int = 40) -> Fraction:
    """High-precision rational approximation of a closed expression."""
    with mpmath.workdps(prec):
        v = _mp(node)
        return Fraction(Decimal(mpmath.nstr(v, prec, min_fixed=-prec, max_fixed=prec)))


def _mp(node: Node):
    if isinstance(node, Num):
        return mpmath.mpf(node.value.numerator) / node.value.denominator
    if isinstance(node, Ident):
        if node.name == "pi":
            return mpmath.pi
        raise ValueError(f"free symbol {node.name!r} in a closed expression")
    h, a = node.head, [_mp(x) for x in node.args]
    if h == "Add":
        return mpmath.fsum(a)
    if h == "Sub":
        return a[0] - a[1]
    if h == "Mul":
        return mpmath.fprod(a)
    if h == "Div":
        return a[0] / a[1]
    if h == "Neg":
        return -a[0]
    if h == "Pow":
        return a[0] ** a[1]
    if h == "Sqrt":
        return mpmath.sqrt(a[0])
    if h in ("Sin", "Cos", "Tan"):
        return getattr(mpmath, h.lower())(mpmath.radians(a[0]))
    raise ValueError(f"cannot evaluate {h}")


# exact trig table -----------------------------------------------------------

_S2, _S3 = (Fraction(1, 2), 2), (Fraction(1, 2), 3)  # (coefficient, radicand)
# value = sign * coefficient * sqrt(radicand)
_TRIG_TABLE: dict[str, dict[int, tuple[int, Fraction, int] | None]] = {
    "sin": {
        0: (0, Fraction(0), 1), 30: (1, Fraction(1, 2), 1), 45: (1, Fraction(1, 2), 2),
        60: (1, Fraction(1, 2), 3), 90: (1, Fraction(1), 1), 120: (1, Fraction(1, 2), 3),
        135: (1, Fraction(1, 2), 2), 150: (1, Fraction(1, 2), 1), 180: (0, Fraction(0), 1),
    },
    "cos": {
        0: (1, Fraction(1), 1), 30: (1, Fraction(1, 2), 3), 45: (1, Fraction(1, 2), 2),
        60: (1, Fraction(1, 2), 1), 90: (0, Fraction(0), 1), 120: (-1, Fraction(1, 2), 1),
        135: (-1, Fraction(1, 2), 2), 150: (-1, Fraction(1, 2), 3), 180: (-1, Fraction(1), 1),
    },
    "tan": {
        0: (0, Fraction(0), 1), 30: (1, Fraction(1, 3), 3), 45: (1, Fraction(1), 1),
        60: (1, Fraction(1), 3), 90: None, 120: (-1, Fraction(1), 3),
        135: (-1, Fraction(1), 1), 150: (-1, Fraction(1, 3), 3), 180: (0, Fraction(0), 1),
    },
}
TRIG_ANGLES = tuple(_TRIG_TABLE["sin"])


def _trig_value_smt(sym: str, entry) -> str:
    sign, coef, rad = entry
    if sign == 0:
        return f"(= {_q(sym)} 0.0)"
    if rad == 1:
        return f"(= {_q(sym)} {smt_number(sign * coef)})"
    square = coef * coef * rad
    rel = ">" if sign > 0 else "<"
    return f"(and (= (* {_q(sym)} {_q(sym)}) {smt_number(square)}) ({rel} {_q(sym)} 0.0))"


def _q(sym: str) -> str:
    return f"|{sym}|"


# backends -------------------------------------------------------------------


@dataclass(frozen=True)
class SolverReply:
    status: str  # sat | unsat | unknown
    values: Mapping[str, tuple[Fraction, bool]] = field(default_factory=dict)  # name -> (value, exact)


class SolverBackend(ABC):
    """Runs one SMT-LIB2 query: the declarations and assertions in ``body``."""

    @abstractmethod
    def run(self, body: str, get_values: Iterable[str], timeout_ms: int) -> SolverReply: ...


def _parse_decimal(text: str) -> tuple[Fraction, bool]:
    text = text.strip()
    exact = not text.endswith("?")
    text = text.rstrip("?")
    neg = False
    if text.startswith("(-") and text.endswith(")"):
        neg, text = True, text[2:-1].strip()
    elif text.startswith("(/"):
        parts = text[2:-1].split()
        return Fraction(Decimal(parts[0])) / Fraction(Decimal(parts[1])), exact
    try:
        v = Fraction(Decimal(text.rstrip("?")))
    except InvalidOperation as exc:
        raise BackendUnavailable(f"unparseable solver value {text!r}") from exc
    return (-v if neg else v), exact


class ProcessBackend(SolverBackend):
    """Talks SMT-LIB2 to a solver executable over stdin/stdout.

    The executable comes from ``path``, else ``$GEOPROOF_SMT_SOLVER``, else
    ``z3`` on ``PATH``.  It is invoked as ``<solver> -in -smt2``.
    """

    def __init__(self, path: str | None = None, args: tuple[str, ...] = ("-in", "-smt2")):
        self.path = path or os.environ.get(SOLVER_ENV) or shutil.which("z3")
        self.args = args

    def run(self, body, get_values, timeout_ms):
        if not self.path:
            raise BackendUnavailable("no SMT solver executable found; set " + SOLVER_ENV)
        names = list(get_values)
        script = (
            "(set-option :pp.decimal true)\n(set-option :pp.decimal_precision 30)\n"
            f"(set-option :timeout {timeout_ms})\n{body}(check-sat)\n"
        )
        if names:
            script += f"(get-value ({' '.join(_q(n) for n in names)}))\n"
        try:
            proc = subprocess.run(
                [self.path, *self.args],
                input=script,
                capture_output=True,
                text=True,
                timeout=timeout_ms / 1000 + 5,
            )
        except (OSError, subprocess.SubprocessError) as exc:
            raise BackendUnavailable(f"solver process failed: {exc}") from exc
        lines = proc.stdout.strip().splitlines()
        if not lines:
            raise BackendUnavailable(f"solver produced no output: {proc.stderr.strip()}")
        status = lines[0].strip()
        if status not in ("sat", "unsat", "unknown"):
            raise BackendUnavailable(f"solver error: {proc.stdout.strip()}")
        values: dict[str, tuple[Fraction, bool]] = {}
        if status == "sat" and names:
            values = _parse_get_value("\n".join(lines[1:]), names)
        return SolverReply(status, values)


def _parse_get_value(text: str, names: list[str]) -> dict[str, tuple[Fraction, bool]]:
    out = {}
    for name in names:
        key = _q(name)
        i = text.find(key)
        if i < 0:
            continue
        j = i + len(key)
        depth, k = 0, j
        while k < len(text):
            ch = text[k]
            if ch == "(":
                depth += 1
            elif ch == ")":
                if depth == 0:
                    break
                depth -= 1
            k += 1
        out[name] = _parse_decimal(text[j:k])
    return out


class EmbeddedZ3Backend(SolverBackend):
    """Runs the same SMT-LIB2 text through the in-process z3 library."""

    def __init__(self):
        try:
            import z3
        except ImportError as exc:  # pragma: no cover - depends on install
            raise BackendUnavailable("z3 python bindings are not installed") from exc
        self.z3 = z3

    def run(self, body, get_values, timeout_ms):
        z3 = self.z3
        solver = z3.Solver()
        solver.set("timeout", int(timeout_ms))
        try:
            solver.from_string(body)
        except z3.Z3Exception as exc:
            raise BackendUnavailable(f"z3 rejected script: {exc}") from exc
        result = solver.check()
        status = "sat" if result == z3.sat else "unsat" if result == z3.unsat else "unknown"
        values = {}
        if status == "sat":
            model = solver.model()
            for name in get_values:
                v = model.eval(z3.Real(name), model_completion=True)
                values[name] = _z3_value(z3, v)
        return SolverReply(status, values)


def _z3_value(z3, v) -> tuple[Fraction, bool]:
    if z3.is_rational_value(v):
        return Fraction(v.numerator_as_long(), v.denominator_as_long()), True
    if z3.is_algebraic_value(v):
        return _parse_decimal(v.as_decimal(30))[0], False
    return _parse_decimal(str(v))


def default_backend() -> SolverBackend:
    """The external solver process when one is found, else embedded z3.

    ``$GEOPROOF_SMT_BACKEND=embedded`` forces the in-process library.
    """
    if os.environ.get(BACKEND_ENV) == "embedded":
        return EmbeddedZ3Backend()
    proc = ProcessBackend()
    if proc.path:
        return proc
    return EmbeddedZ3Backend()


# session --------------------------------------------------------------------


class AlgebraSession:
    """Constraints accumulated while verifying one proof.

    Parameters
    ----------
    backend : SolverBackend, optional
        Defaults to :func:`default_backend`.
    timeout_ms : int
        Budget per solver query.
    eps : Fraction
        Absolute tolerance used when the claimed value is irrational.
    """

    def __init__(
        self,
        backend: SolverBackend | None = None,
        timeout_ms: int = DEFAULT_TIMEOUT_MS,
        eps: Fraction = DEFAULT_EPS,
    ):
        self.backend = backend or default_backend()
        self.timeout_ms = timeout_ms
        self.eps = Fraction(eps)
        self.table = SymbolTable()
        self.constraints: list[Encoded] = []
        self._seen: set[str] = set()
        self.points: set[str] = set()
        self.collinear_runs: set[str] = set()
        self._aux = 0
        self._sat_cache: dict[frozenset[int], str] = {}
        self.queries = 0

    # symbols ------------------------------------------------------------

    def intern(self, measure: Node) -> str:
        """Symbol for a measure term; the same canonical measure always maps to one symbol."""
        c = canonicalize(measure)
        if isinstance(c, Ident):
            return self._free(c.name)
        if not isinstance(c, Term):
            raise UnsupportedMeasure(f"not a measure: {render(measure)}")
        sym = self.table.symbols.get(c)
        if sym is not None:
            return sym
        spec = grammar.spec_for(c.head)
        if spec is not None and spec.category == "trig":
            return self._trig(c)
        if spec is not None and spec.category == "inverse_trig":
            raise InverseTrigUnsupported(f"inverse trigonometric functions are not supported: {render(measure)}")
        if spec is None or spec.category != "measure" or not isinstance(c.args[0], Ident):
            raise UnsupportedMeasure(f"unsupported measure {render(measure)}")
        kind = spec.symbol_prefix
        sym = f"{kind}_{c.args[0].name.lower()}"
        self._register(sym, c, kind)
        upper = _UPPER_BOUND.get(kind)
        if upper is not None:
            self._add(
                Encoded(
                    f"(<= {_q(sym)} {smt_number(upper)})",
                    f"{self.table.display(sym)} ≤ {upper}",
                    frozenset([sym]),
                    "bound",
                )
            )
        self._add(Encoded(f"(> {_q(sym)} 0.0)", f"{self.table.display(sym)} > 0", frozenset([sym]), "bound"))
        return sym

    def _register(self, sym: str, term: Node, kind: str) -> None:
        self.table.symbols[term] = sym
        self.table.terms[sym] = term
        self.table.kinds[sym] = kind

    def _free(self, name: str) -> str:
        if name not in self.table.kinds:
            self.table.kinds[name] = "free"
            self.table.terms[name] = Ident(name)
            self.table.symbols[Ident(name)] = name
            if name == "pi":
                lo, hi = Fraction("3.14159265358979"), Fraction("3.14159265358980")
                self._add(Encoded(f"(and (> |pi| {smt_number(lo)}) (< |pi| {smt_number(hi)}))", "π ≈ 3.14159265358979", frozenset(["pi"]), "bound"))
        return name

    def _trig(self, c: Term) -> str:
        arg = c.args[0]
        arg_smt, arg_text, arg_syms = self._encode(arg)
        if isinstance(arg, Term) and arg.head == "MeasureOfAngle":
            stem = arg.args[0].name.lower()
        elif isinstance(arg, Ident):
            stem = arg.name
        else:
            self._aux += 1
            stem = f"e{self._aux}"
        syms = {}
        for fn in ("sin", "cos"):
            t = Term(fn.capitalize(), (arg,))
            s = f"{fn}_{stem}"
            if t not in self.table.symbols:
                self._register(s, t, fn)
            syms[fn] = s
        s_, c_ = syms["sin"], syms["cos"]
        links = [s_, c_]
        if c.head == "Tan":
            t_ = f"tan_{stem}"
            self._register(t_, c, "tan")
            links.append(t_)
            self._add(Encoded(f"(= (* {_q(t_)} {_q(c_)}) {_q(s_)})", f"tan·cos = sin ({stem})", frozenset([t_, c_, s_]), "trig"))
        every = frozenset(arg_syms) | frozenset(links)
        self._add(Encoded(f"(= (+ (* {_q(s_)} {_q(s_)}) (* {_q(c_)} {_q(c_)})) 1.0)", f"sin²+cos²=1 ({stem})", frozenset([s_, c_]), "trig"))
        self._add(Encoded(f"(and (<= (- 1.0) {_q(c_)}) (<= {_q(c_)} 1.0) (<= (- 1.0) {_q(s_)}) (<= {_q(s_)} 1.0))", f"-1 ≤ sin, cos ≤ 1 ({stem})", frozenset([s_, c_]), "trig"))
        if isinstance(arg, Term) and arg.head == "MeasureOfAngle":
            self._add(Encoded(f"(>= {_q(s_)} 0.0)", f"{self.table.display(s_)} ≥ 0", frozenset([s_]), "trig"))
        for fn, sym in zip(("sin", "cos", "tan"), links):
            for angle, entry in _TRIG_TABLE[fn].items():
                if entry is None:
                    continue
                smt = f"(=> (= {arg_smt} {smt_number(Fraction(angle))}) {_trig_value_smt(sym, entry)})"
                self._add(Encoded(smt, f"{arg_text} = {angle} ⇒ {fn} known", every, "trig"))
        return self.table.symbols[c]

    # encoding -----------------------------------------------------------

    def _encode(self, node: Node) -> tuple[str, str, set[str]]:
        """SMT-LIB text, display text and symbols of an arithmetic CDL expression."""
        if isinstance(node, Num):
            return smt_number(node.value), _display_num(node.value), set()
        if isinstance(node, Ident):
            if node.is_points:
                raise UnsupportedMeasure(f"bare point name {node.name!r} in an arithmetic expression")
            sym = self._free(node.name)
            return _q(sym), sym, {sym}
        h = node.head
        spec = grammar.spec_for(h)
        if spec is not None and spec.category in ("measure", "trig", "inverse_trig"):
            sym = self.intern(node)
            return _q(sym), self.table.display(sym), {sym}
        parts = [self._encode(a) for a in node.args]
        smts = [p[0] for p in parts]
        syms: set[str] = set().union(*(p[2] for p in parts)) if parts else set()
        text = _display_node(node, self.table)
        if h == "Add":
            return f"(+ {' '.join(smts)})", text, syms
        if h == "Mul":
            return f"(* {' '.join(smts)})", text, syms
        if h == "Sub":
            return f"(- {smts[0]} {smts[1]})", text, syms
        if h == "Div":
            return f"(/ {smts[0]} {smts[1]})", text, syms
        if h == "Neg":
            return f"(- {smts[0]})", text, syms
        if h == "Pow":
            exp = exact_value(node.args[1])
            if exp is not None and exp.denominator == 1 and 0 <= exp.numerator <= 8:
                n = exp.numerator
                if n == 0:
                    return "1.0", text, syms
                if n == 1:
                    return smts[0], text, syms
                return f"(* {' '.join([smts[0]] * n)})", text, syms
            if exp == Fraction(1, 2):
                return self._sqrt(Term("Sqrt", (node.args[0],)), smts[0], syms)
            return f"(^ {smts[0]} {smts[1]})", text, syms
        if h == "Sqrt":
            return self._sqrt(node, smts[0], syms)
        raise UnsupportedMeasure(f"unsupported arithmetic head {h!r}")

    def _sqrt(self, node: Term, inner: str, syms: set[str]):
        key = canonicalize(node)
        sym = self.table.symbols.get(key)
        if sym is None:
            self._aux += 1
            sym = f"sqrt_{self._aux}"
            self._register(sym, key, "sqrt")
            self._add(
                Encoded(
                    f"(and (>= {_q(sym)} 0.0) (= (* {_q(sym)} {_q(sym)}) {inner}))",
                    f"{self.table.display(sym)} defined",
                    frozenset(syms | {sym}),
                    "sqrt",
                )
            )
        return _q(sym), self.table.display(sym), syms | {sym}

    def encode(self, c: Constraint) -> Encoded:
        op = {"=": "=", "==": "=", "<=": "<=", "<": "<", ">": ">", ">=": ">="}.get(c.op)
        ls, lt, lsy = self._encode(c.lhs)
        rs, rt, rsy = self._encode(c.rhs)
        shown = {"<=": "≤", ">=": "≥"}.get(c.op, c.op)
        if c.op == "!=":
            return Encoded(f"(not (= {ls} {rs}))", f"{lt} ≠ {rt}", frozenset(lsy | rsy), c.origin)
        if op is None:
            raise ValueError(f"unknown relation {c.op!r}")
        return Encoded(f"({op} {ls} {rs})", f"{lt} {shown} {rt}", frozenset(lsy | rsy), c.origin)

    def _add(self, enc: Encoded) -> bool:
        if enc.smt in self._seen:
            return False
        self._seen.add(enc.smt)
        self.constraints.append(enc)
        return True

    # public API ---------------------------------------------------------

    def assert_constraints(self, cs: Iterable[Constraint]) -> "AlgebraSession":
        for c in cs:
            enc = self.encode(c)
            self._add(enc)
            if c.op in ("=", "==") and isinstance(c.rhs, Num) and len(enc.symbols) == 1:
                (sym,) = enc.symbols
                if isinstance(c.lhs, Term) or isinstance(c.lhs, Ident):
                    self.table.known_values.setdefault(sym, c.rhs.value)
        return self

    def assert_equal(self, term: Term, origin: object = None) -> "AlgebraSession":
        """Assert an ``Equal(lhs, rhs)`` CDL term."""
        lhs, rhs = term.args
        if isinstance(lhs, Num) and not isinstance(rhs, Num):
            lhs, rhs = rhs, lhs
        return self.assert_constraints([Constraint("=", lhs, rhs, origin)])

    def register_points(self, points: Iterable[str]) -> None:
        self.points.update(points)

    def register_collinear(self, run: str) -> None:
        self.collinear_runs.add(run)

    def _collinear_constraints(self) -> None:
        """Equal angles along a collinear run: ∠XPQ = ∠XPR when Q, R lie on the same side of P."""
        for run in sorted(self.collinear_runs):
            others = sorted(self.points - set(run))
            for i, vertex in enumerate(run):
                for side in (run[:i][::-1], run[i + 1 :]):
                    if len(side) < 2:
                        continue
                    for x in others:
                        first = Term("MeasureOfAngle", (Ident(x + vertex + side[0]),))
                        for q in side[1:]:
                            other = Term("MeasureOfAngle", (Ident(x + vertex + q),))
                            self.assert_constraints([Constraint("=", first, other, "collinear")])

    def symbols_of(self, node: Node) -> set[str]:
        return self._encode(node)[2]

    # solving ------------------------------------------------------------

    def _components(self) -> list[list[int]]:
        parent: dict[str, str] = {}

        def find(s):
            while parent.setdefault(s, s) != s:
                parent[s] = parent[parent[s]]
                s = parent[s]
            return s

        for enc in self.constraints:
            syms = sorted(enc.symbols)
            for s in syms[1:]:
                ra, rb = find(syms[0]), find(s)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
        groups: dict[str, list[int]] = {}
        for i, enc in enumerate(self.constraints):
            key = find(min(enc.symbols)) if enc.symbols else ""
            groups.setdefault(key, []).append(i)
        return [groups[k] for k in sorted(groups)]

    def _body(self, indices: Iterable[int], extra: Iterable[str] = (), extra_syms: Iterable[str] = ()) -> str:
        indices = list(indices)
        syms: set[str] = set(extra_syms)
        for i in indices:
            syms |= self.constraints[i].symbols
        lines = ["(set-logic QF_NRA)"]
        lines += [f"(declare-const {_q(s)} Real)" for s in sorted(syms)]
        lines += [f"(assert {self.constraints[i].smt})" for i in indices]
        lines += [f"(assert {e})" for e in extra]
        return "\n".join(lines) + "\n"

    def script(self) -> str:
        """Deterministic SMT-LIB2 text of every constraint in the session."""
        self._collinear_constraints()
        return self._body(range(len(self.constraints))) + "(check-sat)\n"

    def _run(self, body: str, values=()) -> SolverReply:
        self.queries += 1
        reply = self.backend.run(body, list(values), self.timeout_ms)
        return reply

    def _component_status(self, comp: list[int]) -> str:
        key = frozenset(comp)
        if key not in self._sat_cache:
            self._sat_cache[key] = self._run(self._body(comp)).status
        return self._sat_cache[key]

    def consistent(self) -> bool | None:
        """True/False when decided; None when the solver gave up.

        Components built only from domain bounds and collinearity equalities
        are satisfiable by construction and are not sent to the solver.
        """
        self._collinear_constraints()
        trivial = ("bound", "collinear")
        comps = [c for c in self._components() if any(self.constraints[i].origin not in trivial for i in c)]
        if not comps:
            return True
        merged = sorted(i for c in comps for i in c)
        status = self._component_status(merged)
        if status == "unknown" and len(comps) > 1:
            statuses = [self._component_status(c) for c in comps]
            if "unsat" in statuses:
                return False
            status = "unknown" if "unknown" in statuses else "sat"
        if status == "unknown":
            return None
        return status == "sat"

    def _relevant(self, syms: set[str]) -> list[int]:
        out: list[int] = []
        for comp in self._components():
            if any(self.constraints[i].symbols & syms for i in comp):
                out.extend(comp)
        return sorted(out)

    def entails(self, lhs: Node, rhs: Node) -> bool | None:
        """Whether every model satisfies ``lhs = rhs``; None when undecided."""
        self._collinear_constraints()
        ls, _, lsy = self._encode(lhs)
        rs, _, rsy = self._encode(rhs)
        if ls == rs:
            return True
        self._collinear_constraints()
        syms = lsy | rsy
        comp = self._relevant(syms)
        status = self._run(self._body(comp, [f"(not (= {ls} {rs}))"], syms)).status
        if status == "unknown":
            return None
        return status == "unsat"

    def check_goal(self, goal_expr: Node, claimed: Node | Fraction) -> Entailment:
        """Decide whether the constraints force ``goal_expr`` to equal ``claimed``.

        Raises :class:`SolverTimeout` when a query cannot be decided in the budget.
        """
        ok = self.consistent()
        if ok is False:
            return Entailment(Entailment.INCONSISTENT)
        if ok is None:
            raise SolverTimeout(self.timeout_ms)
        gs, _, gsy = self._encode(goal_expr)
        self._collinear_constraints()
        comp = self._relevant(gsy)
        goal_def = f"(= |__goal| {gs})"
        syms = gsy | {"__goal"}

        if isinstance(claimed, Fraction):
            exact = claimed
        else:
            exact = exact_value(claimed)
        if exact is not None:
            target, differs, equals = exact, f"(not (= |__goal| {smt_number(exact)}))", f"(= |__goal| {smt_number(exact)})"
        else:
            target = numeric_value(claimed)
            lo, hi = smt_number(target - self.eps), smt_number(target + self.eps)
            differs = f"(or (< |__goal| {lo}) (> |__goal| {hi}))"
            equals = f"(and (>= |__goal| {lo}) (<= |__goal| {hi}))"

        r2 = self._query(comp, [goal_def, differs], syms)
        if r2.status == "unsat":
            return Entailment(Entailment.ENTAILED)
        other = r2.values["__goal"]
        r3 = self._query(comp, [goal_def, equals], syms)
        if r3.status == "sat":
            return Entailment(Entailment.UNDERCONSTRAINED, (target, other[0]))
        derived, derived_exact = other
        if derived_exact:
            again = f"(not (= |__goal| {smt_number(derived)}))"
        else:
            again = f"(or (< |__goal| {smt_number(derived - self.eps)}) (> |__goal| {smt_number(derived + self.eps)}))"
        r4 = self._query(comp, [goal_def, again], syms)
        if r4.status == "unsat":
            return Entailment(Entailment.UNIQUE_MISMATCH, (derived,))
        return Entailment(Entailment.UNDERCONSTRAINED, (derived, r4.values["__goal"][0]))

    def _query(self, comp, extra, syms) -> SolverReply:
        reply = self._run(self._body(comp, extra, syms), ["__goal"])
        if reply.status == "unknown":
            raise SolverTimeout(self.timeout_ms)
        return reply

    def related_constraints(self, syms: set[str]) -> list[str]:
        self._collinear_constraints()
        return [c.text for c in self.constraints if c.symbols & syms and c.origin not in ("trig", "sqrt")]


# display --------------------------------------------------------------------


def _display_num(v: Fraction) -> str:
    return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"


_PREC = {"Add": 1, "Sub": 1, "Mul": 2, "Div": 2, "Neg": 3, "Pow": 4}


def _display_node(node: Node, table: SymbolTable, parent: int = 0) -> str:
    if isinstance(node, Num):
        s = _display_num(node.value)
        return f"({s})" if parent and (node.value < 0 or node.value.denominator != 1) else s
    if isinstance(node, Ident):
        return node.name
    h = node.head
    spec = grammar.spec_for(h)
    if spec is not None and spec.category == "measure":
        sym = table.lookup(node)
        if sym is not None:
            return table.display(sym)
        return render(node)
    if spec is not None and spec.category in ("trig", "inverse_trig"):
        return f"{h.lower()}({_display_node(node.args[0], table)})"
    if h == "Sqrt":
        return f"√({_display_node(node.args[0], table)})"
    prec = _PREC.get(h)
    if prec is None:
        return render(node)
    a = [_display_node(x, table, prec) for x in node.args]
    if h == "Add":
        s = " + ".join(a)
    elif h == "Sub":
        s = f"{a[0]} - {_display_node(node.args[1], table, prec + 1)}"
    elif h == "Mul":
        s = "*".join(a)
    elif h == "Div":
        s = f"{a[0]}/{_display_node(node.args[1], table, prec + 1)}"
    elif h == "Neg":
        s = f"-{a[0]}"
    else:
        s = f"{a[0]}^{a[1]}"
    return f"({s})" if parent > prec else s


def display(node: Node, table: SymbolTable | None = None) -> str:
    return _display_node(node, table or SymbolTable())


def format_value(v: Fraction) -> str:
    """Render a witness value for feedback, as a decimal."""
    f = float(v)
    return repr(round(f, 6)) if f != int(f) or abs(f) >= 1e15 else f"{int(f)}.0"


# module-level wrappers matching the operation names ------------------------


def intern(session: AlgebraSession, measure: Node) -> str:
    return session.intern(measure)


def assert_constraints(session: AlgebraSession, cs: Iterable[Constraint]) -> AlgebraSession:
    return session.assert_constraints(cs)


def check_goal(session: AlgebraSession, goal_expr: Node, claimed: Node | Fraction, eps: Fraction | None = None) -> Entailment:
    if eps is not None:
        session.eps = Fraction(eps)
    return session.check_goal(goal_expr, claimed)
