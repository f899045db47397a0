"""Problems, theorem dictionaries and proof steps, and their file formats.

Field names follow the published FormalGeo-7k problem files; see
``data/SCHEMA.md`` for the exact layout of both file kinds.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping

from geoproof.cdl import (
    CDLSyntaxError,
    Ident,
    Node,
    Num,
    Term,
    parse_conjunction,
    parse_term,
    point_letters,
    render,
    substitute_letters,
)

DATA_DIR = Path(__file__).parent / "data"


class SchemaError(ValueError):
    """A dataset record or dictionary file does not match the expected layout."""

    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


class DictionaryError(ValueError):
    pass


@dataclass(frozen=True)
class ProofStep:
    step_id: int
    theorem: str
    variation: int
    args: tuple[str, ...]
    stated_premise: str | None = None
    stated_conclusions: tuple[str, ...] | None = None

    @property
    def call(self) -> str:
        return f"{self.theorem}({','.join([str(self.variation), *self.args])})"


@dataclass(frozen=True)
class TheoremDef:
    name: str
    variation: int
    params: tuple[str, ...]
    premise: tuple[Node, ...]
    conclusions: tuple[Node, ...]
    description: str = ""

    @property
    def key(self) -> tuple[str, int]:
        return (self.name, self.variation)

    @property
    def signature(self) -> str:
        return f"{self.name}({','.join(self.params)})"

    def binding(self, args: Iterable[str]) -> dict[str, str]:
        """Letter map from parameter letters to call-argument letters.

        Raises ``ValueError`` when argument shapes do not fit the parameters
        or one parameter letter would be bound to two points.  Distinct
        parameter letters may share a point (``ADE`` and ``ABC`` share ``A``).
        """
        args = tuple(args)
        if len(args) != len(self.params):
            raise ValueError(
                f"{self.name} takes {len(self.params)} arguments ({','.join(self.params)}), got {len(args)}"
            )
        mapping: dict[str, str] = {}
        for param, arg in zip(self.params, args):
            if len(param) != len(arg) or not arg.isalpha() or not arg.isupper():
                raise ValueError(f"argument {arg!r} does not fit parameter {param!r}")
            for p, a in zip(param, arg):
                if mapping.setdefault(p, a) != a:
                    raise ValueError(f"parameter letter {p} bound to both {mapping[p]} and {a}")
        return mapping

    def instantiate(self, args: Iterable[str]) -> tuple[list[Node], list[Node]]:
        mapping = self.binding(args)
        premise = [substitute_letters(t, mapping) for t in self.premise]
        conclusions = [substitute_letters(t, mapping) for t in self.conclusions]
        return premise, conclusions

    def to_gdl_text(self) -> str:
        conclusions = json.dumps([render(c) for c in self.conclusions])
        premise = "&".join(render(t) for t in self.premise)
        return f"{self.name}({self.variation},{','.join(self.params)}): {premise} -> {conclusions}"


TheoremDictionary = dict[tuple[str, int], TheoremDef]


@dataclass(frozen=True)
class Problem:
    id: int
    level: int
    description: str
    construction: tuple[Node, ...]
    conditions: tuple[Node, ...]
    goal: Node
    answer: Node
    proof: tuple[ProofStep, ...] = ()
    construction_extended: tuple[Node, ...] | None = None
    text_cdl: tuple[str, ...] = field(default=(), compare=False)
    image_cdl: tuple[str, ...] = field(default=(), compare=False)
    source: str = field(default="", compare=False)


# theorem calls --------------------------------------------------------------

_CALL_RE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*\((.*)\)\s*$")


def parse_theorem_call(text: str) -> tuple[str, int, tuple[str, ...]]:
    """``angle_addition(1,BFE,EFG)`` -> ``("angle_addition", 1, ("BFE", "EFG"))``.

    A call without a leading integer argument means variation 1.
    """
    m = _CALL_RE.match(text)
    if not m:
        raise ValueError(f"not a theorem call: {text!r}")
    name = m.group(1)
    args = [a.strip() for a in m.group(2).split(",") if a.strip()]
    variation = 1
    if args and re.fullmatch(r"\d+", args[0]):
        variation = int(args[0])
        args = args[1:]
    return name, variation, tuple(args)


def steps_from_calls(calls: Iterable[str]) -> tuple[ProofStep, ...]:
    steps = []
    for i, call in enumerate(calls, start=1):
        name, variation, args = parse_theorem_call(call)
        steps.append(ProofStep(i, name, variation, args))
    return tuple(steps)


# problems -------------------------------------------------------------------

_REQUIRED = ("problem_id", "construction_cdl", "text_cdl", "goal_cdl", "problem_answer")


def _parse_list(record: Mapping[str, Any], name: str, required: bool = True) -> tuple[Node, ...]:
    if name not in record:
        if required:
            raise SchemaError(name, "missing field")
        return ()
    value = record[name]
    if not isinstance(value, list) or not all(isinstance(s, str) for s in value):
        raise SchemaError(name, "expected a list of CDL strings")
    out = []
    for s in value:
        try:
            out.append(parse_term(s))
        except CDLSyntaxError as exc:
            raise SchemaError(name, str(exc)) from exc
    return tuple(out)


def load_problem(record: Mapping[str, Any]) -> Problem:
    """Build a :class:`Problem` from one FormalGeo-7k problem record."""
    if not isinstance(record, Mapping):
        raise SchemaError("<record>", "expected a JSON object")
    for name in _REQUIRED:
        if name not in record:
            raise SchemaError(name, "missing field")
    pid = record["problem_id"]
    if not isinstance(pid, int) or isinstance(pid, bool):
        raise SchemaError("problem_id", f"expected an integer, got {pid!r}")
    seqs = record.get("theorem_seqs", [])
    if not isinstance(seqs, list):
        raise SchemaError("theorem_seqs", "expected a list of theorem calls")
    try:
        proof = steps_from_calls(seqs)
    except ValueError as exc:
        raise SchemaError("theorem_seqs", str(exc)) from exc
    level = record.get("problem_level", len(proof))
    if not isinstance(level, int) or isinstance(level, bool):
        raise SchemaError("problem_level", f"expected an integer, got {level!r}")
    try:
        goal = parse_term(record["goal_cdl"])
    except (CDLSyntaxError, TypeError) as exc:
        raise SchemaError("goal_cdl", str(exc)) from exc
    try:
        answer = parse_term(str(record["problem_answer"]))
    except CDLSyntaxError as exc:
        raise SchemaError("problem_answer", str(exc)) from exc
    text = _parse_list(record, "text_cdl")
    image = _parse_list(record, "image_cdl", required=False)
    extended = None
    if "construction_cdl_extended" in record:
        extended = _parse_list(record, "construction_cdl_extended")
    return Problem(
        id=pid,
        level=level,
        description=str(record.get("problem_text_en", "")),
        construction=_parse_list(record, "construction_cdl"),
        conditions=text + image,
        goal=goal,
        answer=answer,
        proof=proof,
        construction_extended=extended,
        text_cdl=tuple(record["text_cdl"]),
        image_cdl=tuple(record.get("image_cdl", [])),
        source=str(record.get("source", "")),
    )


def problem_to_record(p: Problem) -> dict[str, Any]:
    """Inverse of :func:`load_problem` (annotator names are never written)."""
    record: dict[str, Any] = {
        "problem_id": p.id,
        "problem_level": p.level,
        "problem_text_en": p.description,
        "construction_cdl": [render(t) for t in p.construction],
        "text_cdl": list(p.text_cdl) if p.text_cdl else [render(t) for t in p.conditions],
        "image_cdl": list(p.image_cdl),
        "goal_cdl": render(p.goal),
        "problem_answer": render(p.answer),
        "theorem_seqs": [s.call for s in p.proof],
    }
    if p.source:
        record["source"] = p.source
    if p.construction_extended is not None:
        record["construction_cdl_extended"] = [render(t) for t in p.construction_extended]
    return record


def anonymize(record: Mapping[str, Any]) -> dict[str, Any]:
    return {k: v for k, v in record.items() if k not in ("annotation", "annotator")}


def load_corpus(path: str | Path) -> list[Problem]:
    """Load problems from a directory of ``<id>.json`` files or a JSON-lines file."""
    path = Path(path)
    records: list[Mapping[str, Any]] = []
    if path.is_dir():
        files = sorted(path.glob("*.json"), key=lambda f: (len(f.stem), f.stem))
        for f in files:
            records.append(json.loads(f.read_text(encoding="utf-8")))
    else:
        with path.open(encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    records.append(json.loads(line))
    return [load_problem(r) for r in records]


def write_corpus(problems: Iterable[Problem], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for p in problems:
            fh.write(json.dumps(problem_to_record(p), sort_keys=True) + "\n")


# theorem dictionary ---------------------------------------------------------


def _no_duplicate_keys(pairs):
    out = {}
    for k, v in pairs:
        if k in out:
            raise DictionaryError(f"duplicate key {k!r} in theorem dictionary")
        out[k] = v
    return out


_SIG_RE = re.compile(r"^([a-z_][a-z0-9_]*)\(([A-Z,]*)\)$")


def _make_theorem(name, variation, params, body, signature) -> TheoremDef:
    if not isinstance(body, Mapping) or "premise" not in body or "conclusion" not in body:
        raise SchemaError(signature, "each variation needs 'premise' and 'conclusion'")
    try:
        premise = tuple(parse_conjunction(body["premise"]))
        conclusions = tuple(parse_term(c) for c in body["conclusion"])
    except CDLSyntaxError as exc:
        raise SchemaError(signature, str(exc)) from exc
    allowed = set("".join(params))
    used: set[str] = set()
    for t in (*premise, *conclusions):
        used |= point_letters(t)
    if not used <= allowed:
        raise DictionaryError(
            f"{signature} variation {variation}: letters {''.join(sorted(used - allowed))} are not parameters"
        )
    return TheoremDef(name, variation, params, premise, conclusions, str(body.get("description", "")))


def parse_theorem_dictionary(text: str) -> TheoremDictionary:
    if not text.strip():
        return {}
    doc = json.loads(text, object_pairs_hook=_no_duplicate_keys)
    theorems = doc.get("Theorems", {}) if isinstance(doc, Mapping) else None
    if not isinstance(theorems, Mapping):
        raise SchemaError("Theorems", "expected an object of theorem signatures")
    out: TheoremDictionary = {}
    for signature, body in theorems.items():
        m = _SIG_RE.match(signature)
        if not m:
            raise SchemaError(signature, "signature must look like name(AB,CD)")
        name = m.group(1)
        params = tuple(p for p in m.group(2).split(",") if p)
        if not isinstance(body, Mapping):
            raise SchemaError(signature, "expected an object")
        variations = {k: v for k, v in body.items() if k.isdigit()}
        if not variations:
            variations = {"1": body}
        for key, var_body in variations.items():
            thm = _make_theorem(name, int(key), params, var_body, signature)
            if thm.key in out:
                raise DictionaryError(f"duplicate theorem {name} variation {key}")
            out[thm.key] = thm
    return out


def load_theorem_dictionary(src: str | Path | None = None) -> TheoremDictionary:
    """Load a theorem dictionary file; ``None`` loads the bundled dictionary."""
    path = Path(src) if src is not None else DATA_DIR / "theorems.json"
    return parse_theorem_dictionary(path.read_text(encoding="utf-8"))


def dictionary_to_json(dictionary: Mapping[tuple[str, int], TheoremDef]) -> str:
    grouped: dict[str, dict[str, Any]] = {}
    for (name, variation), thm in sorted(dictionary.items()):
        entry = grouped.setdefault(thm.signature, {})
        entry[str(variation)] = {
            "premise": "&".join(render(t) for t in thm.premise),
            "conclusion": [render(c) for c in thm.conclusions],
        }
    return json.dumps({"Theorems": grouped}, indent=2)


def complete_step(step: ProofStep, dictionary: Mapping[tuple[str, int], TheoremDef]) -> ProofStep:
    """Fill in the canonical premise and conclusions of a bare theorem call."""
    thm = dictionary[(step.theorem, step.variation)]
    premise, conclusions = thm.instantiate(step.args)
    return ProofStep(
        step.step_id,
        step.theorem,
        step.variation,
        step.args,
        "&".join(render(t) for t in premise),
        tuple(render(c) for c in conclusions),
    )


def is_value_goal(goal: Node) -> bool:
    return isinstance(goal, Term) and goal.head == "Value"


__all__ = [
    "DictionaryError",
    "Ident",
    "Num",
    "Problem",
    "ProofStep",
    "SchemaError",
    "Term",
    "TheoremDef",
    "TheoremDictionary",
    "complete_step",
    "dictionary_to_json",
    "load_corpus",
    "load_problem",
    "load_theorem_dictionary",
    "parse_theorem_call",
    "parse_theorem_dictionary",
    "problem_to_record",
    "steps_from_calls",
    "write_corpus",
]
