import json
from dataclasses import asdict

import pytest

from geoproof.analogy import AnalogyIndex
from geoproof.llm import API_KEY_ENV, HttpChatClient, ReplayClient, TransportError
from geoproof.orchestrator import (
    EXHAUSTED,
    OVER_BUDGET,
    SOLVED,
    PromptPlan,
    RecordSink,
    SolveConfig,
    judge,
    load_records,
    plan_prompt,
    solve,
    solve_many,
)
from geoproof.prompt import format_response
from geoproof.verifier import Tier1, Tier3

NO_SLEEP = lambda s: None  # noqa: E731


@pytest.fixture
def responses(nested, dictionary):
    return {
        "good": format_response(nested, dictionary),
        "short": format_response(nested, dictionary, proof=nested.proof[:-1]),
        "garbled": "THEOREM_SEQUENCE:\n1; foo(1,AB)\n",
    }


def test_tier1_then_fixed(nested, dictionary, responses):
    client = ReplayClient({(nested.id, 1, 0): responses["garbled"], (nested.id, 1, 1): responses["good"]})
    records = solve(nested, client, PromptPlan([], dictionary), dictionary)
    assert len(records) == 1 and records[0].final_status == SOLVED
    assert [(a.run, a.retry, a.tier) for a in records[0].attempts] == [(1, 0, 1), (1, 1, 0)]


def test_early_exit_in_later_run(nested, dictionary, responses):
    script = {(nested.id, 2, 3): responses["good"]}
    client = ReplayClient(script, default=responses["short"])
    records = solve(nested, client, PromptPlan([], dictionary), dictionary)
    assert [r.final_status for r in records] == [EXHAUSTED, SOLVED]
    assert len(records[1].attempts) == 4 and len(client.calls) == 6 + 4


def test_exhaustion_bound(nested, dictionary, responses):
    client = ReplayClient({}, default=responses["short"])
    records = solve(nested, client, PromptPlan([], dictionary), dictionary, SolveConfig(retries=5, runs=3))
    assert sum(len(r.attempts) for r in records) == 18
    assert all(r.final_status == EXHAUSTED and len(r.attempts) == 6 for r in records)
    assert all(a.tier == 3 for r in records for a in r.attempts)


def test_feedback_carried_forward(nested, dictionary, responses):
    client = ReplayClient({}, default=responses["short"])
    records = solve(nested, client, PromptPlan([], dictionary), dictionary, SolveConfig(retries=3, runs=1))
    attempts = records[0].attempts
    for t in range(1, len(attempts)):
        conversation = client.calls[t][1]
        user_turns = [text for role, text in conversation if role == "user"][1:]
        assert user_turns == [a.feedback for a in attempts[:t]]
        assert conversation[-1] == ("user", attempts[t - 1].feedback)
        assert conversation[-2] == ("assistant", attempts[t - 1].response)


def test_fresh_conversation_per_run(nested, dictionary, responses):
    client = ReplayClient({}, default=responses["short"])
    solve(nested, client, PromptPlan([], dictionary), dictionary, SolveConfig(retries=1, runs=2))
    assert len(client.calls[2][1]) == 1


def test_records_byte_identical(tmp_path, nested, dictionary, responses):
    outputs = []
    for i in range(2):
        path = tmp_path / f"r{i}.jsonl"
        client = ReplayClient({(nested.id, 1, 2): responses["good"]}, default=responses["short"])
        solve(nested, client, PromptPlan([], dictionary), dictionary, sink=RecordSink(path))
        outputs.append(path.read_bytes())
    assert outputs[0] == outputs[1] and outputs[0]


def test_records_reload(tmp_path, nested, dictionary, responses):
    path = tmp_path / "r.jsonl"
    client = ReplayClient({(nested.id, 1, 1): responses["good"]}, default=responses["short"])
    records = solve(nested, client, PromptPlan([], dictionary), dictionary, sink=RecordSink(path))
    back = load_records(path)
    assert [asdict(r) for r in back] == [asdict(r) for r in records]


def test_transport_backoff(nested, dictionary, responses):
    delays = []

    class Flaky(ReplayClient):
        fails = 2

        def complete(self, system, conversation, key=None):
            if self.fails:
                self.fails -= 1
                raise TransportError("503")
            return super().complete(system, conversation, key)

    solve(nested, Flaky({}, default=responses["good"]), PromptPlan([], dictionary), dictionary, sleep=delays.append)
    assert delays == [1.0, 2.0]


def test_transport_failure_recorded(nested, dictionary):
    client = ReplayClient({})
    records = solve(nested, client, PromptPlan([], dictionary), dictionary, SolveConfig(retries=0, runs=1), sleep=NO_SLEEP)
    (a,) = records[0].attempts
    assert a.status == "transport_error" and a.tier is None
    assert len(client.calls) == 3


def test_token_budget(nested, dictionary, responses):
    client = ReplayClient({}, default=responses["short"])
    records = solve(nested, client, PromptPlan([], dictionary), dictionary, SolveConfig(runs=1, token_budget=10))
    assert records[0].final_status == OVER_BUDGET and not client.calls


def test_correct_answer_invalid_proof_not_solved(nested, dictionary, responses):
    v = judge(nested, responses["short"], dictionary)
    assert isinstance(v, Tier3)


def test_missing_section_is_tier1(nested, dictionary):
    v = judge(nested, "ANSWER: 9", dictionary)
    assert isinstance(v, Tier1) and v.step_id == 0


def test_ablation_plan_uses_random_examples(small_corpus, dictionary):
    index = AnalogyIndex(small_corpus)
    cfg = SolveConfig(analogy=False, seed=4)
    a = plan_prompt(small_corpus[0], index, None, dictionary, cfg)
    b = plan_prompt(small_corpus[0], index, None, dictionary, cfg)
    assert [p.id for p in a.analogs] == [p.id for p in b.analogs] and len(a.analogs) == 5
    assert small_corpus[0].id not in [p.id for p in a.analogs]
    assert a.dictionary == dict(dictionary)


def test_analogy_plan(small_corpus, dictionary, desk_model):
    index = AnalogyIndex(small_corpus)
    plan = plan_prompt(small_corpus[0], index, desk_model, dictionary, SolveConfig(k_narrow=20))
    assert len(plan.analogs) == 5 and len(plan.dictionary) < len(dictionary)


def test_parallel_workers(tmp_path, small_corpus, dictionary):
    targets = small_corpus[:6]
    script = {(p.id, 1, 0): format_response(p, dictionary) for p in targets}
    path = tmp_path / "r.jsonl"
    plans = {p.id: PromptPlan([], dictionary) for p in targets}
    records = solve_many(targets, ReplayClient(script), plans, dictionary, SolveConfig(runs=1, retries=0), RecordSink(path), workers=3)
    assert len(records) == 6
    lines = path.read_text().splitlines()
    assert sorted(json.loads(l)["problem_id"] for l in lines) == sorted(p.id for p in targets)
    assert all(r.solved for r in records)


class FakeResponse:
    def __init__(self, status, body):
        self.status_code = status
        self.text = json.dumps(body)
        self._body = body

    def json(self):
        return self._body


class FakeSession:
    def __init__(self, response):
        self.response = response
        self.sent = []

    def post(self, url, json=None, headers=None, timeout=None):
        self.sent.append((url, json, headers))
        return self.response


def test_http_client(tmp_path, monkeypatch):
    monkeypatch.setenv(API_KEY_ENV, "secret")
    session = FakeSession(FakeResponse(200, {"choices": [{"message": {"content": "hi"}}]}))
    client = HttpChatClient("http://x/v1/", "m", audit_path=tmp_path / "a.jsonl", session=session)
    assert client.complete("sys", [("user", "q")], key=(1, 1, 0)) == "hi"
    url, body, headers = session.sent[0]
    assert url == "http://x/v1/chat/completions" and headers["Authorization"] == "Bearer secret"
    assert body["temperature"] == 1.0 and body["messages"][0] == {"role": "system", "content": "sys"}
    assert json.loads((tmp_path / "a.jsonl").read_text())["key"] == [1, 1, 0]


def test_http_client_errors():
    with pytest.raises(TransportError):
        HttpChatClient("http://x", "m", session=FakeSession(FakeResponse(500, {}))).complete("s", [])
    with pytest.raises(TransportError):
        HttpChatClient("http://x", "m", session=FakeSession(FakeResponse(200, {"nope": 1}))).complete("s", [])


def test_replay_from_directory(tmp_path):
    (tmp_path / "7_1_0.txt").write_text("a")
    (tmp_path / "notes.txt").write_text("ignored")
    client = ReplayClient.from_directory(tmp_path)
    assert client.complete("s", [], key=(7, 1, 0)) == "a"
    with pytest.raises(TransportError):
        client.complete("s", [], key=(7, 1, 1))
