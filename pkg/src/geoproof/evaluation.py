"""Stratified sampling and accuracy reports over solve-loop records."""

from __future__ import annotations

import hashlib
import json
import random
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Sequence

from geoproof.dataset import Problem
from geoproof.orchestrator import SOLVED, RunRecord

SETTINGS = ("first_run_no_retries", "first_run_with_retries", "multi_run_with_retries")


class InsufficientProblems(ValueError):
    def __init__(self, level: int, have: int, need: int):
        super().__init__(f"level {level} has {have} problems, {need} needed")
        self.level = level


class IncompleteRecords(ValueError):
    def __init__(self, missing: Sequence[tuple[int, int]]):
        shown = ", ".join(f"(problem {p}, run {r})" for p, r in missing[:10])
        more = f" and {len(missing) - 10} more" if len(missing) > 10 else ""
        super().__init__(f"records are missing {shown}{more}")
        self.missing = list(missing)


def corpus_digest(problems: Iterable[Problem]) -> str:
    h = hashlib.sha256()
    for p in sorted(problems, key=lambda p: p.id):
        h.update(f"{p.id}:{p.level}\n".encode())
    return h.hexdigest()


def sample(problems: Sequence[Problem], per_level: int = 10, levels: Sequence[int] = (1, 2, 3, 4, 5), seed: int = 0) -> dict:
    """Manifest of ``per_level`` random problem ids for each level."""
    by_level: dict[int, list[int]] = defaultdict(list)
    for p in problems:
        by_level[p.level].append(p.id)
    rng = random.Random(seed)
    chosen = {}
    for level in levels:
        pool = sorted(by_level.get(level, []))
        if len(pool) < per_level:
            raise InsufficientProblems(level, len(pool), per_level)
        chosen[str(level)] = sorted(rng.sample(pool, per_level))
    return {"seed": seed, "per_level": per_level, "levels": list(levels), "ids": chosen, "corpus_digest": corpus_digest(problems)}


def manifest_ids(manifest: Mapping) -> dict[int, int]:
    """problem id -> level."""
    return {pid: int(level) for level, ids in manifest["ids"].items() for pid in ids}


@dataclass
class EvalReport:
    accuracy: dict[str, dict[str, float]]  # setting -> level ("all" for aggregate) -> percent
    answer_accuracy: dict[str, dict[str, float]]
    tier_histogram: dict[str, int]
    mean_retries: dict[str, float]
    mean_runs: dict[str, float]
    problems: int = 0
    per_problem: dict[int, dict] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2)

    def to_text(self) -> str:
        levels = sorted(k for k in self.accuracy[SETTINGS[0]] if k != "all")
        cols = levels + ["all"]
        width = max(len(s) for s in SETTINGS) + 2
        lines = ["Proof accuracy (%)", " " * width + "".join(f"{('L' + c) if c != 'all' else 'all':>8}" for c in cols)]
        for s in SETTINGS:
            lines.append(f"{s:<{width}}" + "".join(f"{self.accuracy[s][c]:>8.1f}" for c in cols))
        lines.append("")
        lines.append("Answer accuracy (%)")
        for s in SETTINGS:
            lines.append(f"{s:<{width}}" + "".join(f"{self.answer_accuracy[s][c]:>8.1f}" for c in cols))
        lines.append("")
        lines.append("Failed attempts by tier: " + ", ".join(f"tier {k}: {v}" for k, v in sorted(self.tier_histogram.items())))
        lines.append("Mean retries per problem: " + ", ".join(f"L{c}={self.mean_retries[c]:.2f}" if c != "all" else f"all={self.mean_retries[c]:.2f}" for c in cols))
        lines.append("Mean runs per problem: " + ", ".join(f"L{c}={self.mean_runs[c]:.2f}" if c != "all" else f"all={self.mean_runs[c]:.2f}" for c in cols))
        return "\n".join(lines) + "\n"


def _outcome(runs: Sequence[RunRecord], correct: str) -> dict[str, bool]:
    def ok(a) -> bool:
        return bool(a.tier == 0) if correct == "proof" else bool(getattr(a, "answer_correct", False))

    first = [r for r in runs if r.run_index == 1]
    first_attempts = first[0].attempts if first else []
    return {
        "first_run_no_retries": any(ok(a) for a in first_attempts if a.retry == 0),
        "first_run_with_retries": any(ok(a) for a in first_attempts),
        "multi_run_with_retries": any(ok(a) for r in runs for a in r.attempts),
    }


def evaluate(records: Sequence[RunRecord], manifest: Mapping, runs: int = 3) -> EvalReport:
    """Accuracy table, tier histogram and retry/run means for the manifest's problems.

    Every problem needs records for each run up to its first solved run
    (or all ``runs`` runs); otherwise :class:`IncompleteRecords` lists the gaps.
    """
    levels = manifest_ids(manifest)
    by_problem: dict[int, list[RunRecord]] = defaultdict(list)
    for r in records:
        if r.problem_id in levels:
            by_problem[r.problem_id].append(r)
    missing = []
    for pid in sorted(levels):
        have = {r.run_index: r for r in by_problem.get(pid, [])}
        for run in range(1, runs + 1):
            if run not in have:
                missing.append((pid, run))
                break
            if have[run].final_status == SOLVED:
                break
    if missing:
        raise IncompleteRecords(missing)

    level_keys = sorted({str(v) for v in levels.values()}, key=int)
    acc = {s: defaultdict(list) for s in SETTINGS}
    ans = {s: defaultdict(list) for s in SETTINGS}
    retries, used_runs = defaultdict(list), defaultdict(list)
    tiers: Counter = Counter()
    per_problem = {}
    for pid in sorted(levels):
        lv = str(levels[pid])
        rs = sorted(by_problem[pid], key=lambda r: r.run_index)
        proof, answer = _outcome(rs, "proof"), _outcome(rs, "answer")
        for s in SETTINGS:
            for key in (lv, "all"):
                acc[s][key].append(proof[s])
                ans[s][key].append(answer[s])
        attempts = [a for r in rs for a in r.attempts]
        n_retries = sum(1 for a in attempts if a.retry > 0)
        for key in (lv, "all"):
            retries[key].append(n_retries)
            used_runs[key].append(len(rs))
        for a in attempts:
            if a.tier:
                tiers[str(a.tier)] += 1
        per_problem[pid] = {"level": levels[pid], **{f"proof_{s}": proof[s] for s in SETTINGS}, "runs": len(rs), "retries": n_retries}

    def pct(d):
        return {k: 100.0 * sum(v) / len(v) for k, v in sorted(d.items())}

    def mean(d):
        return {k: sum(v) / len(v) for k, v in sorted(d.items())}

    for t in ("1", "2", "3"):
        tiers.setdefault(t, 0)
    return EvalReport(
        {s: pct(acc[s]) for s in SETTINGS},
        {s: pct(ans[s]) for s in SETTINGS},
        dict(sorted(tiers.items())),
        mean(retries),
        mean(used_runs),
        len(levels),
        per_problem,
    )
