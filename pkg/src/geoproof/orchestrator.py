"""The solve loop: prompt, ask, verify, feed the diagnosis back, retry."""

from __future__ import annotations

import json
import logging
import random
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from geoproof.algebra import format_value, numeric_value
from geoproof.analogy import AnalogyIndex, narrow_dictionary, retrieve_top_k
from geoproof.dataset import Problem, TheoremDef
from geoproof.feedback import render_feedback
from geoproof.llm import LlmClient, TransportError
from geoproof.prompt import MissingSection, build_prompt, estimate_tokens, parse_response
from geoproof.regressor import MLPRegressor
from geoproof.verifier import Accepted, Tier1, Tier2, Tier3, Verdict, verify

log = logging.getLogger(__name__)

SOLVED = "solved"
EXHAUSTED = "exhausted"
OVER_BUDGET = "over_budget"


@dataclass(frozen=True)
class SolveConfig:
    k_examples: int = 5
    k_narrow: int = 100
    retries: int = 5  # m
    runs: int = 3  # n
    analogy: bool = True
    seed: int = 0
    token_budget: int | None = None
    transport_tries: int = 3
    backoff_s: float = 1.0


@dataclass
class Attempt:
    problem_id: int
    run: int
    retry: int
    response: str | None
    tier: int | None
    detail: str
    feedback: str | None
    prompt_tokens: int
    completion_tokens: int
    status: str = "ok"
    answer_correct: bool | None = None


@dataclass
class RunRecord:
    problem_id: int
    run_index: int
    attempts: list[Attempt] = field(default_factory=list)
    final_status: str = EXHAUSTED

    @property
    def solved(self) -> bool:
        return self.final_status == SOLVED

    @property
    def tokens(self) -> int:
        return sum(a.prompt_tokens + a.completion_tokens for a in self.attempts)


def verdict_tier(v: Verdict) -> int:
    return {Accepted: 0, Tier1: 1, Tier2: 2, Tier3: 3}[type(v)]


def verdict_detail(v: Verdict) -> str:
    if isinstance(v, Tier1):
        return f"step {v.step_id}: {v.detail}"
    if isinstance(v, Tier2):
        return f"step {v.step_id}: missing {v.missing}"
    if isinstance(v, Tier3):
        if v.reason:
            return v.reason
        e = v.entailment
        if e is None:
            return "unknown"
        vals = ",".join(format_value(x) for x in e.values)
        return f"{e.kind}" + (f" ({vals})" if vals else "")
    return "accepted"


class RecordSink:
    """Append-only line-delimited attempt log, safe for concurrent workers."""

    def __init__(self, path: str | Path | None):
        self.path = Path(path) if path else None
        self._lock = threading.Lock()

    def write(self, attempt: Attempt) -> None:
        if self.path is None:
            return
        line = json.dumps(asdict(attempt), sort_keys=True, ensure_ascii=False)
        with self._lock, open(self.path, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")


def load_records(path: str | Path) -> list[RunRecord]:
    """Group an attempt log back into run records."""
    runs: dict[tuple[int, int], RunRecord] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            a = Attempt(**json.loads(line))
            rec = runs.setdefault((a.problem_id, a.run), RunRecord(a.problem_id, a.run))
            rec.attempts.append(a)
            if a.tier == 0:
                rec.final_status = SOLVED
            elif a.status == OVER_BUDGET:
                rec.final_status = OVER_BUDGET
    for rec in runs.values():
        rec.attempts.sort(key=lambda a: a.retry)
    return [runs[k] for k in sorted(runs)]


@dataclass
class PromptPlan:
    analogs: list[Problem]
    dictionary: dict[tuple[str, int], TheoremDef]


def plan_prompt(
    target: Problem,
    corpus: AnalogyIndex,
    model: MLPRegressor | None,
    dictionary: Mapping[tuple[str, int], TheoremDef],
    config: SolveConfig,
) -> PromptPlan:
    """Pick example problems and the dictionary shown to the model.

    With analogy off (or no model) the examples are random problems, drawn
    with ``config.seed``, and the whole dictionary is used.
    """
    if config.analogy and model is not None:
        ranked = retrieve_top_k(target, corpus, model, max(config.k_examples, config.k_narrow))
        problems = [corpus.problems[corpus.by_id[i]] for i, _ in ranked]
        return PromptPlan(problems[: config.k_examples], narrow_dictionary(problems[: config.k_narrow], dictionary))
    rng = random.Random(f"{config.seed}:{target.id}")
    others = [p for p in corpus.problems if p.id != target.id]
    return PromptPlan(rng.sample(others, min(config.k_examples, len(others))), dict(dictionary))


def _ask(client: LlmClient, system: str, conversation, key, config: SolveConfig, sleep) -> str:
    delay = config.backoff_s
    for attempt in range(config.transport_tries):
        try:
            return client.complete(system, list(conversation), key=key)
        except TransportError as exc:
            log.warning("client call %s failed (%s)", key, exc)
            if attempt == config.transport_tries - 1:
                raise
            sleep(delay)
            delay *= 2
    raise AssertionError("unreachable")


def answer_matches(target: Problem, text: str, rel: float = 1e-6) -> bool:
    """Whether the response's ANSWER equals the reference answer numerically."""
    try:
        claimed = parse_response(text).answer_term
        if claimed is None:
            return False
        a, b = numeric_value(claimed), numeric_value(target.answer)
    except (MissingSection, ValueError, ArithmeticError):
        return False
    return abs(a - b) <= rel * max(1, abs(b))


def judge(target: Problem, text: str, dictionary, backend=None) -> Verdict:
    """Verdict for one model response; unreadable responses are tier-1 errors."""
    try:
        response = parse_response(text)
    except MissingSection as exc:
        return Tier1(0, f"The response has no {exc.name} section.")
    if response.diagnostics:
        return Tier1(0, response.diagnostics[0])
    return verify(target, response.proof, response.answer, dictionary=dictionary, backend=backend)


def solve(
    target: Problem,
    client: LlmClient,
    plan: PromptPlan,
    dictionary: Mapping[tuple[str, int], TheoremDef],
    config: SolveConfig = SolveConfig(),
    sink: RecordSink | None = None,
    backend=None,
    sleep: Callable[[float], None] = time.sleep,
) -> list[RunRecord]:
    """Up to ``config.runs`` fresh conversations of ``config.retries + 1`` attempts each.

    Stops at the first accepted proof.  Proofs are checked against the full
    ``dictionary``; the narrowed one only shapes the prompt.
    """
    system, user = build_prompt(target, plan.analogs, plan.dictionary, dictionary)
    records: list[RunRecord] = []
    for run in range(1, config.runs + 1):
        record = RunRecord(target.id, run)
        records.append(record)
        conversation: list[tuple[str, str]] = [("user", user)]
        for retry in range(config.retries + 1):
            prompt_tokens = estimate_tokens(system) + sum(estimate_tokens(t) for _, t in conversation)
            if config.token_budget is not None and prompt_tokens > config.token_budget:
                attempt = Attempt(target.id, run, retry, None, None, "token budget exceeded", None, prompt_tokens, 0, OVER_BUDGET)
                record.attempts.append(attempt)
                record.final_status = OVER_BUDGET
                if sink:
                    sink.write(attempt)
                break
            try:
                text = _ask(client, system, conversation, (target.id, run, retry), config, sleep)
            except TransportError as exc:
                attempt = Attempt(target.id, run, retry, None, None, f"transport failure: {exc}", None, prompt_tokens, 0, "transport_error")
                record.attempts.append(attempt)
                if sink:
                    sink.write(attempt)
                continue
            verdict = judge(target, text, dictionary, backend)
            tier = verdict_tier(verdict)
            feedback = None if tier == 0 else render_feedback(verdict).text
            attempt = Attempt(
                target.id, run, retry, text, tier, verdict_detail(verdict), feedback,
                prompt_tokens, estimate_tokens(text), answer_correct=answer_matches(target, text),
            )
            record.attempts.append(attempt)
            if sink:
                sink.write(attempt)
            if tier == 0:
                record.final_status = SOLVED
                return records
            conversation += [("assistant", text), ("user", feedback)]
    return records


def solve_many(
    targets: Iterable[Problem],
    client: LlmClient,
    plans: Mapping[int, PromptPlan],
    dictionary: Mapping[tuple[str, int], TheoremDef],
    config: SolveConfig = SolveConfig(),
    sink: RecordSink | None = None,
    workers: int = 1,
    backend=None,
) -> list[RunRecord]:
    targets = list(targets)

    def one(p: Problem) -> list[RunRecord]:
        return solve(p, client, plans[p.id], dictionary, config, sink, backend)

    if workers <= 1:
        results = [one(p) for p in targets]
    else:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(one, targets))
    return [r for rs in results for r in rs]
