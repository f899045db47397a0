"""Natural-language rendering of verifier verdicts.

The text layout is fixed; golden copies of the three tiers live under
``tests/golden``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from geoproof.algebra import Entailment, format_value
from geoproof.verifier import Accepted, Tier1, Tier2, Tier3, Verdict

SNAPSHOT_CAP = 40
CLOSING = "Please fix the proof."
UNDERCONSTRAINED = (
    "Your proof doesn't uniquely determine the value. "
    "You need to use additional theorems to constrain the value."
)


@dataclass(frozen=True)
class FeedbackMessage:
    tier: int
    text: str

    def __str__(self) -> str:
        return self.text


def _snapshot_lines(snapshot: Mapping[str, Sequence[str]]) -> list[str]:
    lines = []
    for heading, items in snapshot.items():
        items = list(items)
        shown = items[:SNAPSHOT_CAP]
        more = f", ... ({len(items) - SNAPSHOT_CAP} more)" if len(items) > SNAPSHOT_CAP else ""
        lines.append(f"  {heading}: {', '.join(shown)}{more}")
    return lines or ["  None"]


def _context(snapshot, steps, constraints) -> list[str]:
    lines = ["- Available premises:", *_snapshot_lines(snapshot)]
    lines.append("- Theorems related to the goal:")
    lines += [f"  {s}" for s in steps] or ["  None found that constrain this goal"]
    lines.append("- Solver constraints directly related to this goal:")
    lines.append(f"  {', '.join(constraints)}" if constraints else "  None")
    return lines


def _tier3_error(v: Tier3) -> str:
    if v.reason in ("timeout", "inverse_trig", "unsupported", "relation"):
        return v.note
    e = v.entailment
    if e is None or e.kind == Entailment.UNDERCONSTRAINED:
        return UNDERCONSTRAINED
    if e.kind == Entailment.UNIQUE_MISMATCH:
        return (
            f"Your proof determines the value {format_value(e.values[0])}, "
            "which does not match your answer."
        )
    return "The established premises and theorem conclusions contradict each other, so no value satisfies them."


def render_feedback(v: Verdict) -> FeedbackMessage:
    """Render a failing verdict as the message shown to the proof writer."""
    if isinstance(v, Accepted):
        raise ValueError("accepted proofs have no feedback")
    if isinstance(v, Tier1):
        if v.call:
            lines = [f"Theorem: {v.call}"]
        else:
            lines = [f"Step {v.step_id}" if v.step_id else "Your response could not be read."]
        if v.stated is not None and v.correct is not None:
            lines.append(f"You output the following {v.part}: {v.stated}")
            lines.append(f"But the correct {v.part}: {v.correct}")
            if not v.detail.endswith("mismatch"):
                lines.append(v.detail)
        else:
            lines.append(f"Error: {v.detail}")
        lines.append(CLOSING)
        return FeedbackMessage(1, "\n".join(lines) + "\n")
    if isinstance(v, Tier2):
        lines = [
            f"- Error: You tried to use theorem: {v.call};",
            f"{v.premise};{list(v.conclusions)!r}",
            "",
            f"Missing premise: {v.missing_description}",
            f"Details: Premise provided: {v.premise}",
            *_context(v.snapshot, v.related_steps, v.related_constraints),
            CLOSING,
        ]
        return FeedbackMessage(2, "\n".join(lines) + "\n")
    if isinstance(v, Tier3):
        lines = [
            f"- Goal: {v.goal}",
            f"- Model answer: {v.claimed}",
            f"- Error: {_tier3_error(v)}",
            *_context(v.snapshot, v.related_steps, v.related_constraints),
            CLOSING,
        ]
        return FeedbackMessage(3, "\n".join(lines) + "\n")
    raise TypeError(f"not a verdict: {v!r}")
