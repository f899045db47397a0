"""Terms of the Condition Declaration Language and their text syntax.

A CDL expression is either a predicate/function application such as
``Equal(MeasureOfAngle(ABC),40)`` or an infix arithmetic expression such as
``2*x+10`` or ``3/2``.  Both forms parse into the same tree of :class:`Term`,
:class:`Ident` and :class:`Num` nodes.  Infix operators become the prefix heads
``Add``, ``Sub``, ``Mul``, ``Div``, ``Pow`` and ``Neg``; a quotient of two
numeric literals folds into a single exact rational.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Union

from geoproof import grammar

logger = logging.getLogger(__name__)

_warned_heads: set[str] = set()


@dataclass(frozen=True)
class Ident:
    """A bare identifier: point letters (``ABC``), an unknown (``x``) or a symbol."""

    name: str

    def __str__(self) -> str:
        return self.name

    @property
    def is_points(self) -> bool:
        return bool(_POINTS_RE.fullmatch(self.name))


@dataclass(frozen=True)
class Num:
    """An exact rational literal."""

    value: Fraction

    def __str__(self) -> str:
        return render_number(self.value)


@dataclass(frozen=True)
class Term:
    head: str
    args: tuple["Node", ...] = ()

    def __str__(self) -> str:
        return render(self)


Node = Union[Term, Ident, Num]

_POINTS_RE = re.compile(r"[A-Z]+")


class CDLSyntaxError(ValueError):
    """Raised for malformed CDL text; ``offset`` is the byte offset of the problem."""

    def __init__(self, message: str, source: str, offset: int, expected: str | None = None):
        self.source = source
        self.offset = offset
        self.expected = expected
        hint = f"; expected {expected}" if expected else ""
        super().__init__(f"{message} at offset {offset}{hint}: {source!r}")


def render_number(value: Fraction) -> str:
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def render(node: Node) -> str:
    """Serialize a node to canonical CDL text (prefix form, no whitespace)."""
    if isinstance(node, Term):
        return f"{node.head}({','.join(render(a) for a in node.args)})"
    return str(node)


# tokenizer ------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d+)?)|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*/^(),]))"
)


@dataclass
class _Tok:
    kind: str  # num | ident | op | end
    text: str
    offset: int


def _tokenize(src: str) -> list[_Tok]:
    toks: list[_Tok] = []
    pos = 0
    n = len(src)
    while pos < n:
        if src[pos].isspace():
            pos += 1
            continue
        m = _TOKEN_RE.match(src, pos)
        if not m or m.end() == pos:
            raise CDLSyntaxError(f"unexpected character {src[pos]!r}", src, _byte_offset(src, pos))
        kind = m.lastgroup
        toks.append(_Tok(kind, m.group(kind), m.start(kind)))
        pos = m.end()
    toks.append(_Tok("end", "", n))
    return toks


def _byte_offset(src: str, char_pos: int) -> int:
    return len(src[:char_pos].encode("utf-8"))


# parser ---------------------------------------------------------------------


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.toks = _tokenize(src)
        self.i = 0

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def next(self) -> _Tok:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def error(self, msg: str, tok: _Tok, expected: str | None = None):
        raise CDLSyntaxError(msg, self.src, _byte_offset(self.src, tok.offset), expected)

    def expect(self, text: str) -> _Tok:
        tok = self.next()
        if tok.text != text or tok.kind not in ("op",):
            self.error(f"unexpected {tok.text or 'end of input'!r}", tok, repr(text))
        return tok

    def parse(self) -> Node:
        node = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            self.error(f"trailing input {tok.text!r}", tok, "end of expression")
        return node

    def expr(self) -> Node:
        terms = [self.product()]
        ops: list[str] = []
        while self.peek().kind == "op" and self.peek().text in "+-":
            ops.append(self.next().text)
            terms.append(self.product())
        node = terms[0]
        pending: list[Node] = [node]
        # left-assoc; consecutive '+' flatten into one Add
        for op, rhs in zip(ops, terms[1:]):
            if op == "+":
                pending.append(rhs)
            else:
                node = _fold_add(pending)
                node = Term("Sub", (node, rhs))
                pending = [node]
        return _fold_add(pending)

    def product(self) -> Node:
        node = self.unary()
        factors: list[Node] = [node]
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.next().text
            rhs = self.unary()
            if op == "*":
                factors.append(rhs)
            else:
                left = _fold_mul(factors)
                factors = [_fold_div(left, rhs)]
        return _fold_mul(factors)

    def unary(self) -> Node:
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            self.next()
            operand = self.unary()
            if isinstance(operand, Num):
                return Num(-operand.value)
            return Term("Neg", (operand,))
        if tok.kind == "op" and tok.text == "+":
            self.next()
            return self.unary()
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.peek().kind == "op" and self.peek().text == "^":
            self.next()
            exponent = self.unary()
            return Term("Pow", (base, exponent))
        return base

    def atom(self) -> Node:
        tok = self.next()
        if tok.kind == "num":
            return Num(Fraction(tok.text))
        if tok.kind == "ident":
            if self.peek().kind == "op" and self.peek().text == "(":
                return self.call(tok)
            return Ident(tok.text)
        if tok.kind == "op" and tok.text == "(":
            node = self.expr()
            self.expect(")")
            return node
        self.error(
            f"unexpected {tok.text or 'end of input'!r}",
            tok,
            "a number, identifier, call or '('",
        )

    def call(self, name_tok: _Tok) -> Term:
        self.expect("(")
        args: list[Node] = []
        if not (self.peek().kind == "op" and self.peek().text == ")"):
            args.append(self.expr())
            while self.peek().kind == "op" and self.peek().text == ",":
                self.next()
                args.append(self.expr())
        close = self.peek()
        if not (close.kind == "op" and close.text == ")"):
            self.error(f"unexpected {close.text or 'end of input'!r}", close, "',' or ')'")
        self.next()
        head = grammar.FUNCTION_ALIASES.get(name_tok.text, name_tok.text)
        term = Term(head, tuple(args))
        _check_arity(term, self, name_tok)
        return term


def _fold_add(parts: list[Node]) -> Node:
    if len(parts) == 1:
        return parts[0]
    return Term("Add", tuple(parts))


def _fold_mul(parts: list[Node]) -> Node:
    if len(parts) == 1:
        return parts[0]
    return Term("Mul", tuple(parts))


def _fold_div(left: Node, right: Node) -> Node:
    if isinstance(left, Num) and isinstance(right, Num) and right.value != 0:
        return Num(left.value / right.value)
    return Term("Div", (left, right))


def _check_arity(term: Term, parser: _Parser, tok: _Tok) -> None:
    spec = grammar.spec_for(term.head)
    if spec is None:
        if term.head not in _warned_heads:
            _warned_heads.add(term.head)
            logger.warning("unknown CDL head %r parsed as a generic term", term.head)
        return
    n = len(term.args)
    if spec.args is None:
        if n < spec.min_args:
            parser.error(f"{term.head} takes at least {spec.min_args} arguments, got {n}", tok)
        return
    if n != len(spec.args):
        parser.error(f"{term.head} takes {len(spec.args)} arguments, got {n}", tok)
    for kind, arg in zip(spec.args, term.args):
        if kind == grammar.POINTS and not (isinstance(arg, Ident) and arg.is_points):
            parser.error(f"{term.head} expects point letters, got {render(arg)!r}", tok, "uppercase point letters")


def parse_term(src: str) -> Node:
    """Parse one CDL expression.

    >>> render(parse_term("Equal(MeasureOfAngle(ABC), 40)"))
    'Equal(MeasureOfAngle(ABC),40)'
    """
    if not isinstance(src, str):
        raise TypeError(f"expected str, got {type(src).__name__}")
    return _Parser(src).parse()


def split_conjunction(src: str) -> list[str]:
    """Split a premise formula ``A(..)&B(..)`` at top-level ``&``."""
    parts: list[str] = []
    depth = 0
    start = 0
    for i, ch in enumerate(src):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "&" and depth == 0:
            parts.append(src[start:i])
            start = i + 1
    parts.append(src[start:])
    return [p.strip() for p in parts if p.strip()]


def parse_conjunction(src: str) -> list[Node]:
    return [parse_term(p) for p in split_conjunction(src)]


# tree helpers ---------------------------------------------------------------


def walk(node: Node) -> Iterator[Node]:
    yield node
    if isinstance(node, Term):
        for arg in node.args:
            yield from walk(arg)


def point_letters(node: Node) -> set[str]:
    """All point letters mentioned anywhere in the tree."""
    out: set[str] = set()
    for n in walk(node):
        if isinstance(n, Ident) and n.is_points:
            out.update(n.name)
    return out


def substitute_letters(node: Node, mapping: dict[str, str]) -> Node:
    """Rename point letters inside point-letter identifiers."""
    if isinstance(node, Ident):
        if node.is_points:
            return Ident("".join(mapping.get(c, c) for c in node.name))
        return node
    if isinstance(node, Term):
        return Term(node.head, tuple(substitute_letters(a, mapping) for a in node.args))
    return node
