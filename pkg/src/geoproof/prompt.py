"""Prompt assembly and response parsing for the proof-writing model."""

from __future__ import annotations

import ast
import json
import logging
import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from geoproof import grammar
from geoproof.cdl import CDLSyntaxError, Ident, Node, Num, Term, parse_term, render, walk
from geoproof.dataset import DATA_DIR, Problem, ProofStep, TheoremDef, parse_theorem_call
from geoproof.state import canonicalize, extend_construction

log = logging.getLogger(__name__)

SYSTEM_TEMPLATE = (DATA_DIR / "system_prompt.txt").read_text(encoding="utf-8")
SECTIONS = ("EQUATIONS", "GOAL_SYMBOL", "ANSWER", "THEOREM_SEQUENCE")
CHARS_PER_TOKEN = 4


class MissingSection(ValueError):
    def __init__(self, name: str):
        super().__init__(f"response has no {name} section")
        self.name = name


def estimate_tokens(text: str) -> int:
    return -(-len(text) // CHARS_PER_TOKEN)


# symbol-level rendering ------------------------------------------------------


def symbol_name(measure: Node) -> str | None:
    """``LengthOfLine(GA)`` -> ``ll_ag``; ``None`` for anything that is not a measure."""
    if isinstance(measure, Ident):
        return measure.name
    c = canonicalize(measure)
    if not isinstance(c, Term) or not c.args or not isinstance(c.args[0], Ident):
        return None
    spec = grammar.spec_for(c.head)
    if spec is None or spec.category != "measure":
        return None
    return f"{spec.symbol_prefix}_{c.args[0].name.lower()}"


_OPS = {"Add": " + ", "Sub": " - ", "Mul": "*", "Div": "/"}


def symbolic(node: Node) -> str:
    if isinstance(node, Num):
        return str(node.value)
    name = symbol_name(node)
    if name is not None:
        return name
    if isinstance(node, Term):
        if node.head in _OPS:
            parts = [symbolic(a) for a in node.args]
            if node.head == "Sub":
                parts = parts[:1] + [f"({p})" if " " in p else p for p in parts[1:]]
            if node.head in ("Mul", "Div"):
                parts = [f"({p})" if " " in p else p for p in parts]
            return _OPS[node.head].join(parts)
        if node.head == "Pow":
            return f"{symbolic(node.args[0])}**{symbolic(node.args[1])}"
        return f"{node.head.lower()}({', '.join(symbolic(a) for a in node.args)})"
    return render(node)


def equation_text(eq: Term) -> str:
    lhs, rhs = eq.args
    r = symbolic(rhs)
    if " " in r:
        r = f"({r})"
    return f"{symbolic(lhs)} - {r}" if r != "0" else symbolic(lhs)


def _is_value(eq: Node) -> bool:
    return (
        isinstance(eq, Term)
        and eq.head == "Equal"
        and symbol_name(eq.args[0]) is not None
        and not isinstance(eq.args[0], Ident)
        and all(not isinstance(n, Ident) or n.name == "pi" for n in walk(eq.args[1]) if not isinstance(n, Term))
        and not any(isinstance(n, Term) and symbol_name(n) for n in walk(eq.args[1]))
    )


def symbols_and_values(p: Problem) -> list[str]:
    return [f"{render(c.args[0])};{symbol_name(c.args[0])};{render(c.args[1])}" for c in p.conditions if _is_value(c)]


def problem_equations(p: Problem, dictionary: Mapping[tuple[str, int], TheoremDef] | None = None) -> list[str]:
    out = [equation_text(c) for c in p.conditions if isinstance(c, Term) and c.head == "Equal" and not _is_value(c)]
    if dictionary:
        for step in p.proof:
            thm = dictionary.get((step.theorem, step.variation))
            if thm is None:
                continue
            for c in thm.instantiate(step.args)[1]:
                if isinstance(c, Term) and c.head == "Equal":
                    out.append(equation_text(c))
    return out


def goal_symbol(p: Problem) -> str:
    target = p.goal.args[0] if isinstance(p.goal, Term) and p.goal.head == "Value" else p.goal
    return symbol_name(target) or symbolic(target)


def theorem_sequence(p: Problem, dictionary: Mapping[tuple[str, int], TheoremDef]) -> list[str]:
    lines = []
    for step in p.proof:
        thm = dictionary.get((step.theorem, step.variation))
        if thm is None:
            lines.append(f"{step.step_id}; {step.call}; ; []")
            continue
        premise, conclusions = thm.instantiate(step.args)
        lines.append(
            f"{step.step_id}; {step.call}; {'&'.join(render(t) for t in premise)}; "
            f"{json.dumps([render(c) for c in conclusions])}"
        )
    return lines


# prompt ---------------------------------------------------------------------


def render_gdl(dictionary: Mapping[tuple[str, int], TheoremDef]) -> str:
    return "\n".join(thm.to_gdl_text() for _, thm in sorted(dictionary.items()))


def _inputs(label: str, p: Problem) -> list[str]:
    extended = p.construction_extended if p.construction_extended is not None else tuple(extend_construction(p.construction))
    return [
        f"Inputs for Problem {label}:",
        "DESCRIPTION:",
        p.description,
        "CONSTRUCTION_CDL:",
        *[render(t) for t in p.construction],
        "TEXT_CDL:",
        *[render(t) for t in p.conditions],
        "GOAL_CDL:",
        render(p.goal),
        "CONSTRUCTION_CDL_EXTENDED:",
        *[render(t) for t in extended],
        "SYMBOLS_AND_VALUES:",
        *symbols_and_values(p),
    ]


def _outputs(label: str, p: Problem, dictionary) -> list[str]:
    return [
        f"Outputs for Problem {label}:",
        "EQUATIONS:",
        *problem_equations(p, dictionary),
        "GOAL_SYMBOL:",
        goal_symbol(p),
        "ANSWER:",
        render(p.answer),
        "THEOREM_SEQUENCE:",
        *theorem_sequence(p, dictionary),
    ]


def build_prompt(
    target: Problem,
    analogs: Sequence[Problem],
    dictionary: Mapping[tuple[str, int], TheoremDef],
    full_dictionary: Mapping[tuple[str, int], TheoremDef] | None = None,
) -> tuple[str, str]:
    """System and user text for one target.

    ``dictionary`` is spliced into the system prompt; the analogs' own
    sequences are rendered from ``full_dictionary`` (default: ``dictionary``)
    since an analog may use a theorem that was narrowed away.
    """
    if not analogs:
        log.warning("building a prompt for problem %s without examples", target.id)
    system = SYSTEM_TEMPLATE.replace("{GDL}", render_gdl(dictionary))
    source = full_dictionary or dictionary
    lines: list[str] = []
    for i, a in enumerate(analogs, 1):
        lines += _inputs(f"A{i}", a) + _outputs(f"A{i}", a, source) + [""]
    lines += _inputs("B", target) + ["", "Outputs for Problem B:"]
    return system, "\n".join(lines)


# response -------------------------------------------------------------------


@dataclass
class LlmResponse:
    equations: list[str]
    goal_symbol: str
    answer: str
    proof: tuple[ProofStep, ...]
    diagnostics: list[str] = field(default_factory=list)

    @property
    def answer_term(self) -> Node | None:
        try:
            return parse_term(self.answer)
        except CDLSyntaxError:
            return None


_HEADER = re.compile(r"^[\s#*>`]*(EQUATIONS|GOAL_SYMBOL|ANSWER|THEOREM_SEQUENCE)[\s*`]*:[\s*`]*(.*)$")
_STEP_START = re.compile(r"^\s*(?:step_id\s*)?(\d+)\s*[;.)]")


def _sections(text: str) -> dict[str, list[str]]:
    found: dict[str, list[str]] = {}
    current = None
    for raw in text.replace("\\_", "_").replace("\\&", "&").splitlines():
        m = _HEADER.match(raw)
        if m:
            current = m.group(1)
            found.setdefault(current, [])
            if m.group(2).strip():
                found[current].append(m.group(2).strip())
        elif current is not None:
            found[current].append(raw.strip().strip("`"))
    return found


def _conclusions(text: str) -> tuple[str, ...] | None:
    text = text.strip()
    if not text:
        return None
    try:
        value = json.loads(text)
    except ValueError:
        try:
            value = ast.literal_eval(text)
        except (ValueError, SyntaxError):
            return None
    if isinstance(value, str):
        value = [value]
    if not isinstance(value, (list, tuple)) or not all(isinstance(v, str) for v in value):
        return None
    return tuple(value)


def parse_theorem_sequence(lines: Sequence[str] | str) -> tuple[tuple[ProofStep, ...], list[str]]:
    """Steps of a ``id; call; premise; conclusions`` listing plus diagnostics for bad lines.

    A step may wrap over several lines; a new step starts at a line that
    begins with its number.
    """
    if isinstance(lines, str):
        lines = lines.splitlines()
    chunks: list[str] = []
    for line in lines:
        if not line.strip():
            continue
        if _STEP_START.match(line) or not chunks:
            chunks.append(line.strip())
        else:
            chunks[-1] += " " + line.strip()
    steps: list[ProofStep] = []
    problems: list[str] = []
    for chunk in chunks:
        m = _STEP_START.match(chunk)
        if not m:
            problems.append(f"Cannot read step line: {chunk}")
            continue
        fields = [f.strip() for f in chunk[m.end():].split(";")]
        fields = [f for f in fields if f] if len(fields) > 3 else fields
        if not fields or not fields[0]:
            problems.append(f"Step {m.group(1)} has no theorem: {chunk}")
            continue
        try:
            name, variation, args = parse_theorem_call(fields[0])
        except ValueError:
            problems.append(f"Step {m.group(1)} does not name a theorem call: {fields[0]}")
            continue
        premise = fields[1] if len(fields) > 1 and fields[1] else None
        conclusions = _conclusions(";".join(fields[2:])) if len(fields) > 2 else None
        if len(fields) > 2 and conclusions is None:
            problems.append(f"Step {m.group(1)} has an unreadable conclusion list: {';'.join(fields[2:])}")
            continue
        steps.append(ProofStep(len(steps) + 1, name, variation, args, premise, conclusions))
    return tuple(steps), problems


def parse_response(text: str) -> LlmResponse:
    found = _sections(text)
    for name in SECTIONS:
        if name not in found:
            raise MissingSection(name)
    equations = [e for line in found["EQUATIONS"] for e in [line.strip()] if e]
    goal = next((line for line in found["GOAL_SYMBOL"] if line), "")
    answer = next((line for line in found["ANSWER"] if line), "")
    answer = answer.strip().strip("()").strip() if answer.startswith("(") and answer.endswith(")") else answer.strip()
    proof, diagnostics = parse_theorem_sequence(found["THEOREM_SEQUENCE"])
    return LlmResponse(equations, goal.strip(), answer, proof, diagnostics)


def format_response(p: Problem, dictionary: Mapping[tuple[str, int], TheoremDef], answer: str | None = None, proof: Sequence[ProofStep] | None = None) -> str:
    """A response in the expected output format; used for fixtures and replay scripts."""
    shown = p if proof is None else Problem(p.id, p.level, p.description, p.construction, p.conditions, p.goal, p.answer, tuple(proof))
    return "\n".join(
        [
            "EQUATIONS:",
            *problem_equations(shown, dictionary),
            "GOAL_SYMBOL:",
            goal_symbol(p),
            "ANSWER:",
            answer if answer is not None else render(p.answer),
            "THEOREM_SEQUENCE:",
            *theorem_sequence(shown, dictionary),
        ]
    ) + "\n"
