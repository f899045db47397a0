"""Step-by-step proof checking with tiered diagnostics.

Each step is checked in a fixed order: the call itself (tier 1), then its
premises against the facts and equations established so far (tier 2).  Only
after every step applies cleanly is the goal value checked (tier 3).  The
first failure found is returned.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence, Union

from geoproof import algebra
from geoproof.algebra import (
    AlgebraSession,
    Entailment,
    InverseTrigUnsupported,
    SolverBackend,
    SolverTimeout,
    UnsupportedMeasure,
)
from geoproof.cdl import CDLSyntaxError, Ident, Node, Num, Term, parse_conjunction, parse_term, render, walk
from geoproof.dataset import Problem, ProofStep, TheoremDef, load_theorem_dictionary
from geoproof.state import GeoState, PatternNotGround, canonical_key, expand, extend_construction

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Accepted:
    tier = 0


@dataclass(frozen=True)
class Tier1:
    step_id: int
    detail: str
    call: str = ""
    stated: str | None = None
    correct: str | None = None
    part: str = "premises"  # which text was compared: premises | conclusions
    tier = 1


@dataclass(frozen=True)
class Tier2:
    step_id: int
    call: str
    premise: str
    conclusions: tuple[str, ...]
    missing: str
    missing_description: str
    snapshot: Mapping[str, Sequence[str]]
    related_steps: tuple[str, ...] = ()
    related_constraints: tuple[str, ...] = ()
    tier = 2


@dataclass(frozen=True)
class Tier3:
    goal: str
    claimed: str
    entailment: Entailment | None
    snapshot: Mapping[str, Sequence[str]] = field(default_factory=dict)
    related_steps: tuple[str, ...] = ()
    related_constraints: tuple[str, ...] = ()
    reason: str | None = None  # timeout | inverse_trig | unsupported | relation
    note: str = ""
    tier = 3


Verdict = Union[Accepted, Tier1, Tier2, Tier3]


# session --------------------------------------------------------------------


@dataclass
class _Run:
    state: GeoState
    session: AlgebraSession
    goal: Node
    applied: list[tuple[ProofStep, list[Node]]] = field(default_factory=list)


def _seed(problem: Problem, backend: SolverBackend | None, timeout_ms: int) -> _Run:
    state = GeoState()
    session = AlgebraSession(backend=backend, timeout_ms=timeout_ms)
    extended = problem.construction_extended
    if extended is None:
        extended = tuple(extend_construction(problem.construction))
    run = _Run(state, session, problem.goal)
    for fact in (*problem.construction, *extended, *problem.conditions):
        _assert(run, fact, 0)
    return run


def _assert(run: _Run, fact: Node, step_id: int) -> None:
    if not isinstance(fact, Term):
        raise UnsupportedMeasure(f"not a statement: {render(fact)}")
    if fact.head == "Equal":
        run.session.assert_equal(fact, origin=step_id)
        return
    for t in expand(fact):
        if t.head == "Equal":
            run.session.assert_equal(t, origin=step_id)
            continue
        run.state.assert_fact(t, step_id)
        if t.head == "Collinear":
            run.session.register_collinear(t.args[0].name)
    run.session.register_points(run.state.points)


# tier 1 ---------------------------------------------------------------------


def _canonical_set(terms: Sequence[Node]) -> list[str]:
    return sorted(canonical_key(t) for t in terms)


def _join(terms: Sequence[Node]) -> str:
    return "&".join(render(t) for t in terms)


def check_syntax(step: ProofStep, dictionary: Mapping[tuple[str, int], TheoremDef]) -> Tier1 | None:
    """Tier-1 check of one call: theorem known, arguments fit, stated premise matches."""
    thm = dictionary.get((step.theorem, step.variation))
    if thm is None:
        if any(name == step.theorem for name, _ in dictionary):
            known = sorted(v for name, v in dictionary if name == step.theorem)
            detail = (
                f"Theorem {step.theorem} has no variation {step.variation}; "
                f"available variations: {', '.join(map(str, known))}"
            )
        else:
            detail = f"Undefined theorem: {step.theorem} is not in the theorem dictionary"
        return Tier1(step.step_id, detail, step.call)
    try:
        premise, _ = thm.instantiate(step.args)
    except ValueError as exc:
        return Tier1(step.step_id, f"Incorrect arguments for {thm.signature}: {exc}", step.call)
    if step.stated_premise is not None:
        correct = _join(premise)
        try:
            stated = parse_conjunction(step.stated_premise)
        except CDLSyntaxError as exc:
            return Tier1(step.step_id, f"Premise could not be parsed: {exc}", step.call, step.stated_premise, correct)
        if _canonical_set(stated) != _canonical_set(premise):
            return Tier1(step.step_id, "Premise mismatch", step.call, step.stated_premise, correct)
    return None


# tier 2 ---------------------------------------------------------------------


def _describe_missing(term: Node, premise: Sequence[Node]) -> str:
    if isinstance(term, Term) and term.head == "Equal":
        lhs, rhs = term.args
        if isinstance(rhs, Term) and isinstance(lhs, Num):
            lhs, rhs = rhs, lhs
        if isinstance(lhs, Term) and lhs.head == "MeasureOfAngle" and isinstance(rhs, Num):
            name = lhs.args[0].name
            value = algebra._display_num(rhs.value)
            triangles = {
                canonical_key(p)
                for p in premise
                if isinstance(p, Term) and p.head == "Polygon" and len(p.args[0].name) == 3
            }
            if canonical_key(Term("Polygon", (Ident(name),))) in triangles:
                return f"Angle measure {value}° for triangle {name} is not established in the premise."
            return f"Angle measure {value}° for angle {name} is not established in the premise."
        return f"Equation {render(term)} is not established in the premise."
    return f"{render(term)} is not established in the premise."


def check_premises(step: ProofStep, thm: TheoremDef, state: GeoState, session: AlgebraSession) -> tuple[Node, str] | None:
    """First premise conjunct that is not established, with its description."""
    premise, _ = thm.instantiate(step.args)
    for conj in premise:
        if isinstance(conj, Term) and conj.head == "Equal":
            ok = session.entails(*conj.args)
            if ok is None:
                return conj, f"Could not decide {render(conj)} within the solver budget."
        else:
            try:
                ok = state.holds(conj)
            except PatternNotGround:
                ok = False
        if not ok:
            return conj, _describe_missing(conj, premise)
    return None


# apply ----------------------------------------------------------------------


def apply_step(step: ProofStep, thm: TheoremDef, run: _Run) -> Tier1 | None:
    """Assert the instantiated conclusions; stated conclusions must be among them."""
    _, conclusions = thm.instantiate(step.args)
    if step.stated_conclusions is not None:
        correct = [render(c) for c in conclusions]
        try:
            stated = [parse_term(c) for c in step.stated_conclusions]
        except CDLSyntaxError as exc:
            return Tier1(step.step_id, f"Conclusion could not be parsed: {exc}", step.call, str(list(step.stated_conclusions)), str(correct), "conclusions")
        allowed = set(_canonical_set(conclusions))
        if not all(canonical_key(t) in allowed for t in stated):
            return Tier1(step.step_id, "Conclusion mismatch", step.call, str(list(step.stated_conclusions)), str(correct), "conclusions")
    for c in conclusions:
        _assert(run, c, step.step_id)
    run.applied.append((step, conclusions))
    return None


# related facts for feedback --------------------------------------------------


def _goal_expr(goal: Node) -> Node:
    if isinstance(goal, Term) and goal.head == "Value":
        return goal.args[0]
    return goal


def _symbols(session: AlgebraSession, node: Node) -> set[str]:
    try:
        return session.symbols_of(node)
    except UnsupportedMeasure:
        return set()


def _related(run: _Run, extra: Sequence[tuple[ProofStep, list[Node]]] = ()) -> tuple[tuple[str, ...], tuple[str, ...]]:
    session = run.session
    goal = _goal_expr(run.goal)
    goal_syms = _symbols(session, goal) if not _is_relation(goal) else set()
    hop = set(goal_syms)
    for enc in session.constraints:
        if enc.symbols & goal_syms and enc.origin not in ("bound", "trig", "sqrt"):
            hop |= enc.symbols
    goal_points = {ch for n in walk(goal) if isinstance(n, Ident) and n.is_points for ch in n.name}
    steps = []
    for step, conclusions in [*run.applied, *extra]:
        hit = False
        for c in conclusions:
            if isinstance(c, Term) and c.head == "Equal":
                hit |= bool(_symbols(session, c.args[0]) & hop or _symbols(session, c.args[1]) & hop)
            else:
                pts = {ch for n in walk(c) if isinstance(n, Ident) and n.is_points for ch in n.name}
                hit |= bool(goal_points) and goal_points <= pts
        if hit:
            call = f"{step.theorem}({step.variation}, {', '.join(step.args)})"
            steps.append(f"Step {step.step_id} - {call}: {', '.join(render(c) for c in conclusions)}")
    constraints = tuple(dict.fromkeys(session.related_constraints(goal_syms)))
    return tuple(steps), constraints


def _is_relation(goal: Node) -> bool:
    from geoproof import grammar

    if not isinstance(goal, Term):
        return False
    spec = grammar.spec_for(goal.head)
    return spec is not None and spec.category in ("relation", "entity") and goal.head != "Equal"


_GOAL_WORDS = {
    "MeasureOfAngle": "measure of angle",
    "LengthOfLine": "length of line",
    "MeasureOfArc": "measure of arc",
    "LengthOfArc": "length of arc",
    "RadiusOfCircle": "radius of circle",
    "DiameterOfCircle": "diameter of circle",
    "PerimeterOfTriangle": "perimeter of triangle",
    "AreaOfTriangle": "area of triangle",
    "PerimeterOfQuadrilateral": "perimeter of quadrilateral",
    "AreaOfQuadrilateral": "area of quadrilateral",
    "PerimeterOfCircle": "perimeter of circle",
    "AreaOfCircle": "area of circle",
}


def describe_goal(goal: Node, session: AlgebraSession | None = None) -> str:
    expr = _goal_expr(goal)
    if isinstance(expr, Term) and expr.head in _GOAL_WORDS and isinstance(expr.args[0], Ident):
        return f"{_GOAL_WORDS[expr.head]} {expr.args[0].name}"
    if isinstance(expr, Ident):
        return f"value of {expr.name}"
    return algebra.display(expr, session.table if session else None)


def format_claim(claimed: Node) -> str:
    v = algebra.exact_value(claimed) if not isinstance(claimed, Fraction) else claimed
    if v is not None:
        return repr(float(v))
    return render(claimed)


def _mentions_inverse_trig(node: Node) -> bool:
    return any(isinstance(n, Term) and n.head in ("ArcSin", "ArcCos", "ArcTan") for n in walk(node))


# verify ---------------------------------------------------------------------

_DEFAULT_DICTIONARY: dict | None = None


def default_dictionary():
    global _DEFAULT_DICTIONARY
    if _DEFAULT_DICTIONARY is None:
        _DEFAULT_DICTIONARY = load_theorem_dictionary()
    return _DEFAULT_DICTIONARY


def verify(
    problem: Problem,
    proof: Sequence[ProofStep] | None = None,
    claimed: Node | str | None = None,
    dictionary: Mapping[tuple[str, int], TheoremDef] | None = None,
    backend: SolverBackend | None = None,
    timeout_ms: int = algebra.DEFAULT_TIMEOUT_MS,
) -> Verdict:
    """Check ``proof`` (default: the problem's own) and the claimed answer.

    Returns :class:`Accepted` or the first failure as a tier-1/2/3 verdict.
    """
    dictionary = default_dictionary() if dictionary is None else dictionary
    proof = problem.proof if proof is None else proof
    if claimed is None:
        claimed = problem.answer
    elif isinstance(claimed, str):
        try:
            claimed = parse_term(claimed)
        except CDLSyntaxError:
            return Tier3(render(_goal_expr(problem.goal)), claimed, None, reason="unsupported", note="The answer could not be parsed.")

    try:
        run = _seed(problem, backend, timeout_ms)
    except InverseTrigUnsupported as exc:
        return Tier3(describe_goal(problem.goal), format_claim(claimed), None, reason="inverse_trig", note=str(exc))
    except UnsupportedMeasure as exc:
        return Tier3(describe_goal(problem.goal), format_claim(claimed), None, reason="unsupported", note=str(exc))

    for step in proof:
        t1 = check_syntax(step, dictionary)
        if t1 is not None:
            return t1
        thm = dictionary[(step.theorem, step.variation)]
        try:
            missing = check_premises(step, thm, run.state, run.session)
        except (UnsupportedMeasure, SolverTimeout) as exc:
            return Tier1(step.step_id, f"Premise cannot be checked: {exc}", step.call)
        if missing is not None:
            conj, description = missing
            premise, conclusions = thm.instantiate(step.args)
            related_steps, related_constraints = _related(run, [(step, conclusions)])
            return Tier2(
                step.step_id,
                step.call,
                step.stated_premise if step.stated_premise is not None else _join(premise),
                tuple(render(c) for c in conclusions),
                render(conj),
                description,
                run.state.snapshot(),
                related_steps,
                related_constraints,
            )
        try:
            t1 = apply_step(step, thm, run)
        except InverseTrigUnsupported as exc:
            return Tier1(step.step_id, str(exc), step.call)
        if t1 is not None:
            return t1
    return _check_goal(run, claimed)


def _check_goal(run: _Run, claimed: Node) -> Verdict:
    goal = run.goal
    session = run.session
    expr = _goal_expr(goal)
    goal_text = describe_goal(goal, session)
    claim_text = format_claim(claimed)

    def tier3(entailment, reason=None, note=""):
        steps, constraints = _related(run)
        return Tier3(goal_text, claim_text, entailment, run.state.snapshot(), steps, constraints, reason, note)

    if _is_relation(expr):
        try:
            if run.state.holds(expr):
                return Accepted()
        except PatternNotGround:
            pass
        return tier3(None, "relation", f"{render(expr)} is not established by the proof.")
    if _mentions_inverse_trig(expr) or _mentions_inverse_trig(claimed):
        return tier3(
            Entailment(Entailment.UNDERCONSTRAINED),
            "inverse_trig",
            "The value involves an inverse trigonometric function, which the solver cannot evaluate.",
        )
    try:
        if isinstance(expr, Term) and expr.head == "Equal":
            ok = session.entails(*expr.args)
            if ok:
                return Accepted()
            return tier3(Entailment(Entailment.UNDERCONSTRAINED), None)
        result = session.check_goal(expr, claimed)
    except SolverTimeout as exc:
        return tier3(None, "timeout", f"The solver could not decide the goal within {exc.budget_ms / 1000:g} seconds.")
    except UnsupportedMeasure as exc:
        return tier3(None, "unsupported", str(exc))
    if result.entailed:
        return Accepted()
    return tier3(result)


def verify_problem(problem: Problem, **kw) -> Verdict:
    return verify(problem, **kw)


def render_feedback(v: Verdict):
    """See :func:`geoproof.feedback.render_feedback`."""
    from geoproof.feedback import render_feedback as _render

    return _render(v)
