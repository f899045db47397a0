"""Store of established geometric facts.

Facts are kept in canonical, direction-agnostic form.  Sub-facts implied by a
stored fact (a sub-sequence of a collinear run, a subset of cocircular points,
the lines and angles spanned by a collinear run) are not materialized; they
are recognised when queried.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Iterator

from geoproof import grammar
from geoproof.cdl import Ident, Node, Term, parse_term, render, substitute_letters


class PatternNotGround(ValueError):
    pass


# canonicalization -----------------------------------------------------------


def _rotations(s: str) -> Iterator[str]:
    for i in range(len(s)):
        yield s[i:] + s[:i]


def canonical_polygon(s: str) -> str:
    return min(min(_rotations(s)), min(_rotations(s[::-1])))


def canonical_angle(s: str) -> str:
    return min(s, s[::-1])


def canonical_line(s: str) -> str:
    return "".join(sorted(s)) if len(s) == 2 else s


def _names(args) -> list[str]:
    return [a.name if isinstance(a, Ident) else render(a) for a in args]


def _triangle_pair_orbit(a: str, b: str) -> Iterator[tuple[str, str]]:
    n = len(a)
    perms = []
    for shift in range(n):
        perms.append([(i + shift) % n for i in range(n)])
    perms += [list(reversed(p)) for p in perms]
    for p in perms:
        pa = "".join(a[i] for i in p)
        pb = "".join(b[i] for i in p)
        yield pa, pb
        yield pb, pa


def _shape_orbit(edges: list[str]) -> Iterator[tuple[str, ...]]:
    n = len(edges)
    rev = [e[::-1] if len(e) == 2 else e for e in reversed(edges)]
    for seq in (edges, rev):
        for i in range(n):
            yield tuple(seq[i:] + seq[:i])


def canonicalize(node: Node) -> Node:
    """Map a term to the canonical member of its symmetry orbit.

    >>> render(canonicalize(parse_term("MeasureOfAngle(CBA)")))
    'MeasureOfAngle(ABC)'
    >>> render(canonicalize(parse_term("Polygon(GEF)")))
    'Polygon(EFG)'
    """
    if not isinstance(node, Term):
        return node
    args = tuple(canonicalize(a) for a in node.args)
    spec = grammar.spec_for(node.head)
    sym = spec.symmetry if spec else "none"
    if sym == "commutative":
        return Term(node.head, tuple(sorted(args, key=render)))
    if not all(isinstance(a, Ident) for a in args):
        return Term(node.head, args)
    names = _names(args)
    if sym == "line" and len(names) == 1:
        names = [canonical_line(names[0])]
    elif sym == "angle" and len(names) == 1:
        names = [canonical_angle(names[0])]
    elif sym == "polygon" and len(names) == 1:
        names = [canonical_polygon(names[0])]
    elif sym == "collinear" and len(names) == 1:
        names = [min(names[0], names[0][::-1])]
    elif sym == "cocircular" and len(names) == 2:
        names = [names[0], "".join(sorted(names[1]))]
    elif sym == "parallel" and len(names) == 2:
        a, b = names
        # same-direction parallels: swapping the lines or reversing both keeps the fact
        names = list(min((a, b), (b, a), (a[::-1], b[::-1]), (b[::-1], a[::-1])))
    elif sym == "perpendicular" and len(names) == 2:
        names = sorted(names)
    elif sym == "line_first" and len(names) == 2:
        names = [canonical_line(names[0]), names[1]]
    elif sym == "line_second" and len(names) == 2:
        names = [names[0], canonical_line(names[1])]
    elif sym == "angle_second" and len(names) == 2:
        names = [names[0], canonical_angle(names[1])]
    elif sym == "isosceles" and len(names) == 1 and len(names[0]) == 3:
        s = names[0]
        names = [min(s, s[0] + s[2] + s[1])]
    elif sym == "triangle_pair" and len(names) == 2 and len(names[0]) == len(names[1]):
        names = list(min(_triangle_pair_orbit(*names)))
    elif sym == "shape":
        names = list(min(_shape_orbit(names)))
    return Term(node.head, tuple(Ident(n) for n in names))


def canonical_key(node: Node) -> str:
    return render(canonicalize(node))


# predicate extensions -------------------------------------------------------


def extensions(term: Term) -> list[Term]:
    """Facts implied by the definition of ``term``'s predicate (one level)."""
    spec = grammar.spec_for(term.head)
    if not spec or not spec.extends or not spec.params:
        return []
    params = spec.params.split(",")
    if len(params) != len(term.args) or not all(isinstance(a, Ident) for a in term.args):
        return []
    mapping: dict[str, str] = {}
    for p, a in zip(params, term.args):
        if len(p) != len(a.name):
            return []
        for pc, ac in zip(p, a.name):
            mapping[pc] = ac
    return [substitute_letters(parse_term(e), mapping) for e in spec.extends]


def expand(term: Term) -> list[Term]:
    """``term`` followed by the transitive closure of its predicate extensions."""
    out: list[Term] = []
    seen: set[str] = set()
    todo = [term]
    while todo:
        t = todo.pop(0)
        key = canonical_key(t)
        if key in seen:
            continue
        seen.add(key)
        out.append(t)
        todo.extend(extensions(t))
    return out


def is_algebraic(term: Node) -> bool:
    return isinstance(term, Term) and term.head == "Equal"


# the store ------------------------------------------------------------------


@dataclass
class GeoState:
    facts: dict[str, dict[Term, int]] = field(default_factory=lambda: defaultdict(dict))
    derived_log: list[tuple[int, Term]] = field(default_factory=list)
    points: set[str] = field(default_factory=set)

    def copy(self) -> "GeoState":
        new = GeoState()
        for head, group in self.facts.items():
            new.facts[head] = dict(group)
        new.derived_log = list(self.derived_log)
        new.points = set(self.points)
        return new

    def __len__(self) -> int:
        return sum(len(g) for g in self.facts.values())

    def __iter__(self) -> Iterator[Term]:
        for head in sorted(self.facts):
            yield from sorted(self.facts[head], key=render)

    def count(self, node: Node) -> int:
        c = canonicalize(node)
        return 1 if isinstance(c, Term) and c in self.facts.get(c.head, {}) else 0

    def assert_fact(self, term: Node, step_id: int = 0) -> "GeoState":
        """Insert the canonical form of a geometric relation; duplicates are no-ops."""
        c = canonicalize(term)
        if not isinstance(c, Term) or is_algebraic(c):
            raise ValueError(f"not a geometric relation: {render(term)}")
        group = self.facts[c.head]
        if c not in group:
            group[c] = step_id
            self.derived_log.append((step_id, c))
            for a in c.args:
                if isinstance(a, Ident) and a.is_points:
                    self.points.update(a.name)
        return self

    def stored(self, head: str) -> Iterable[Term]:
        return self.facts.get(head, {}).keys()

    # queries ---------------------------------------------------------------

    def collinear_runs(self) -> list[str]:
        return [t.args[0].name for t in self.stored("Collinear")]

    def on_common_line(self, points: str) -> bool:
        return any(set(points) <= set(run) for run in self.collinear_runs())

    def holds(self, pattern: Node) -> bool:
        """True iff the pattern is stored or implied by a stored fact."""
        if not isinstance(pattern, Term):
            raise PatternNotGround(f"not a relation: {render(pattern)}")
        for a in pattern.args:
            if isinstance(a, Ident) and not a.is_points:
                raise PatternNotGround(f"unbound argument {a.name!r} in {render(pattern)}")
        c = canonicalize(pattern)
        if c in self.facts.get(c.head, {}):
            return True
        head = c.head
        names = [a.name for a in c.args if isinstance(a, Ident)]
        if head == "Point":
            return set(names[0]) <= self.points
        if head == "Line":
            return self._line(names[0])
        if head == "Angle":
            s = names[0]
            return len(set(s)) == 3 and self._line(s[:2]) and self._line(s[1:])
        if head == "Collinear":
            return self._collinear(names[0])
        if head == "Cocircular" and len(names) == 2:
            circle, pts = names
            return any(
                t.args[0].name == circle and set(pts) <= set(t.args[1].name)
                for t in self.stored("Cocircular")
            )
        if head == "Circle":
            return self._circle(names[0])
        if head == "Arc" and len(names[0]) == 3:
            circle, x, y = names[0]
            return x != y and self.holds(Term("Cocircular", (Ident(circle), Ident(x + y))))
        if head == "Polygon" and len(names[0]) == 3:
            s = names[0]
            return (
                len(set(s)) == 3
                and all(self._line(s[i] + s[(i + 1) % 3]) for i in range(3))
                and not self.on_common_line(s)
            )
        return False

    def _circle(self, name: str) -> bool:
        if any(t.args[0].name == name for t in self.stored("Cocircular")):
            return True
        return any(t.args[1].name == name for t in self.stored("IsCentreOfCircle"))

    def _line(self, s: str) -> bool:
        if len(s) != 2 or s[0] == s[1]:
            return False
        if Term("Line", (Ident(canonical_line(s)),)) in self.facts.get("Line", {}):
            return True
        return self.on_common_line(s)

    def _collinear(self, s: str) -> bool:
        if len(set(s)) != len(s):
            return False
        for run in self.collinear_runs():
            for seq in (run, run[::-1]):
                if _is_subsequence(s, seq):
                    return True
        return False

    # feedback --------------------------------------------------------------

    def snapshot(self) -> dict[str, list[str]]:
        """Canonical facts grouped under feedback headings, each sorted."""
        groups: dict[str, list[str]] = defaultdict(list)
        for head, group in self.facts.items():
            spec = grammar.spec_for(head)
            if spec is not None and spec.category == "entity" and head != "Polygon":
                continue
            heading = spec.heading if spec and spec.heading else "Other Facts"
            for t in group:
                groups[heading].append(describe_fact(t))
        return {h: sorted(groups[h]) for h in grammar.HEADING_ORDER if groups.get(h)}


def _is_subsequence(needle: str, hay: str) -> bool:
    it = iter(hay)
    return all(ch in it for ch in needle)


def describe_fact(t: Term) -> str:
    names = [a.name if isinstance(a, Ident) else render(a) for a in t.args]
    h = t.head
    if h == "PerpendicularBetweenLine":
        return f"{names[0]}⊥{names[1]}"
    if h == "ParallelBetweenLine":
        return f"{names[0]}∥{names[1]}"
    if h == "Cocircular":
        return f"{names[1]} on circle {names[0]}"
    if h == "IsCentreOfCircle":
        return f"{names[1]} center: {names[0]}"
    if h == "IsDiameterOfCircle":
        return f"{names[0]} diameter of {names[1]}"
    if h == "IsTangentOfCircle":
        return f"{names[0]} tangent to {names[1]}"
    if h == "IsMidpointOfLine":
        return f"{names[0]} midpoint of {names[1]}"
    if h == "IsBisectorOfAngle":
        return f"{names[0]} bisects {names[1]}"
    if h == "SimilarBetweenTriangle":
        return f"{names[0]}~{names[1]}"
    if h == "CongruentBetweenTriangle":
        return f"{names[0]}≅{names[1]}"
    spec = grammar.spec_for(h)
    if spec is not None and spec.heading and len(names) == 1:
        return names[0]
    return render(t)


def sub_collinear(run: str, min_len: int = 3) -> set[str]:
    """Every ordered sub-sequence of a collinear run (used by tests and reports)."""
    out = set()
    for k in range(min_len, len(run) + 1):
        for idx in combinations(range(len(run)), k):
            out.add("".join(run[i] for i in idx))
    return out


def assert_fact(state: GeoState, term: Node, step_id: int = 0) -> GeoState:
    return state.assert_fact(term, step_id)


def holds(state: GeoState, pattern: Node) -> bool:
    return state.holds(pattern)


# construction extension -----------------------------------------------------


def _shape_cycle(shape: Term) -> list[str] | None:
    edges = [a.name for a in shape.args if isinstance(a, Ident)]
    if len(edges) < 3 or any(len(e) != 2 for e in edges):
        return None
    for e, nxt in zip(edges, edges[1:] + edges[:1]):
        if e[1] != nxt[0]:
            return None
    return [e[0] for e in edges]


def _drop_straight(cycle: list[str], runs: list[str]) -> list[str]:
    """Remove vertices lying between their two neighbours on a collinear run."""
    changed = True
    while changed and len(cycle) > 3:
        changed = False
        for i, v in enumerate(cycle):
            a, b = cycle[i - 1], cycle[(i + 1) % len(cycle)]
            if any(_is_subsequence(a + v + b, r) or _is_subsequence(b + v + a, r) for r in runs):
                cycle = cycle[:i] + cycle[i + 1 :]
                changed = True
                break
    return cycle


def _merge(a: list[str], b: list[str]) -> list[str] | None:
    """Union of two polygon cycles sharing exactly one edge traversed in opposite directions."""
    shared = []
    for i in range(len(a)):
        x, y = a[i], a[(i + 1) % len(a)]
        for j in range(len(b)):
            if b[j] == y and b[(j + 1) % len(b)] == x:
                shared.append((i, j))
    if len(shared) != 1:
        return None
    i, j = shared[0]
    rot_a = a[i + 1 :] + a[: i + 1]  # starts at y, ends at x
    rot_b = b[j + 1 :] + b[: j + 1]  # starts at x, ends at y
    merged = rot_a + rot_b[1:-1]
    return merged if len(set(merged)) == len(merged) else None


def extend_construction(construction: Iterable[Node]) -> list[Term]:
    """Facts implied by the construction statements: points, lines, arcs,
    circles, and the polygons bounded by each shape and by each union of two
    shapes sharing an edge."""
    construction = [t for t in construction if isinstance(t, Term)]
    runs = [t.args[0].name for t in construction if t.head == "Collinear"]
    out: list[Term] = []
    seen: set[Term] = {canonicalize(t) for t in construction}

    def emit(t: Term):
        c = canonicalize(t)
        if c not in seen:
            seen.add(c)
            out.append(t)

    cycles = []
    for t in construction:
        if t.head == "Shape":
            for a in t.args:
                if not isinstance(a, Ident):
                    continue
                for ch in a.name:
                    emit(Term("Point", (Ident(ch),)))
                if len(a.name) == 2:
                    emit(Term("Line", (a,)))
                elif len(a.name) == 3:
                    emit(Term("Arc", (a,)))
            cyc = _shape_cycle(t)
            if cyc:
                cycles.append(cyc)
        elif t.head == "Collinear":
            for ch in t.args[0].name:
                emit(Term("Point", (Ident(ch),)))
        elif t.head == "Cocircular":
            emit(Term("Circle", (t.args[0],)))
            for ch in t.args[0].name + t.args[1].name:
                emit(Term("Point", (Ident(ch),)))
    polys = [_drop_straight(c, runs) for c in cycles]
    for i in range(len(cycles)):
        for j in range(i + 1, len(cycles)):
            m = _merge(cycles[i], cycles[j])
            if m:
                polys.append(_drop_straight(m, runs))
    for p in polys:
        if len(p) >= 3 and len(set(p)) == len(p):
            emit(Term("Polygon", (Ident("".join(p)),)))
    return out
