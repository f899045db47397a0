import json
from collections import defaultdict

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geoproof.evaluation import SETTINGS, IncompleteRecords, InsufficientProblems, evaluate, manifest_ids, sample
from geoproof.orchestrator import EXHAUSTED, SOLVED, Attempt, RecordSink, RunRecord, load_records


def attempt(pid, run, retry, tier, answer=None):
    return Attempt(pid, run, retry, "r", tier, "", None, 10, 5, answer_correct=answer if answer is not None else tier == 0)


def run_record(pid, run, tiers):
    attempts = [attempt(pid, run, i, t) for i, t in enumerate(tiers)]
    return RunRecord(pid, run, attempts, SOLVED if tiers[-1] == 0 else EXHAUSTED)


MANIFEST = {"seed": 0, "per_level": 1, "levels": [1, 2], "ids": {"1": [10], "2": [20]}, "corpus_digest": ""}


def test_all_first_attempt():
    r = evaluate([run_record(10, 1, [0]), run_record(20, 1, [0])], MANIFEST)
    assert all(r.accuracy[s]["all"] == 100.0 for s in SETTINGS)
    assert r.mean_retries["all"] == 0 and r.mean_runs["all"] == 1


def test_solved_only_in_second_run():
    recs = [run_record(10, 1, [0]), run_record(20, 1, [3, 3, 3]), run_record(20, 2, [2, 0])]
    r = evaluate(recs, MANIFEST, runs=3)
    assert r.accuracy["first_run_no_retries"]["2"] == 0.0
    assert r.accuracy["first_run_with_retries"]["2"] == 0.0
    assert r.accuracy["multi_run_with_retries"]["2"] == 100.0
    assert r.tier_histogram == {"1": 0, "2": 1, "3": 3}
    assert r.mean_runs["2"] == 2 and r.mean_retries["2"] == 3


def test_answer_vs_proof_split():
    recs = [RunRecord(10, 1, [attempt(10, 1, 0, 3, answer=True)], EXHAUSTED), run_record(20, 1, [0])]
    r = evaluate(recs, MANIFEST, runs=1)
    assert r.accuracy["multi_run_with_retries"]["1"] == 0.0
    assert r.answer_accuracy["multi_run_with_retries"]["1"] == 100.0


def test_incomplete_records():
    with pytest.raises(IncompleteRecords) as info:
        evaluate([run_record(10, 1, [3])], MANIFEST, runs=2)
    assert info.value.missing == [(10, 2), (20, 1)]


def test_report_outputs():
    r = evaluate([run_record(10, 1, [0]), run_record(20, 1, [1, 0])], MANIFEST)
    assert "first_run_no_retries" in r.to_text()
    assert json.loads(r.to_json())["accuracy"]["first_run_with_retries"]["all"] == 100.0


# random record sets: monotone settings and an independent recount ------------

run_tiers = st.lists(st.sampled_from([1, 2, 3]), min_size=0, max_size=5).flatmap(
    lambda fails: st.booleans().map(lambda ok: fails + [0] if ok else fails + [3])
)


def _recount(path, manifest):
    """Accuracy per setting straight from the raw attempt lines."""
    rows = [json.loads(l) for l in open(path)]
    ids = manifest_ids(manifest)
    hits = defaultdict(set)
    for a in rows:
        if a["tier"] != 0 or a["problem_id"] not in ids:
            continue
        hits["multi_run_with_retries"].add(a["problem_id"])
        if a["run"] == 1:
            hits["first_run_with_retries"].add(a["problem_id"])
            if a["retry"] == 0:
                hits["first_run_no_retries"].add(a["problem_id"])
    return {s: 100.0 * len(hits[s]) / len(ids) for s in SETTINGS}


@given(st.lists(st.lists(run_tiers, min_size=1, max_size=3), min_size=2, max_size=6))
@settings(max_examples=60, deadline=None)
def test_monotone_and_recount(tmp_path_factory, problems):
    path = tmp_path_factory.mktemp("rec") / "r.jsonl"
    sink = RecordSink(path)
    manifest = {"ids": {"1": []}}
    for pid, runs in enumerate(problems, 1):
        manifest["ids"]["1"].append(pid)
        for run, tiers in enumerate(runs, 1):
            rec = run_record(pid, run, tiers)
            for a in rec.attempts:
                sink.write(a)
            if rec.final_status == SOLVED:
                break
        else:
            for run in range(len(runs) + 1, 4):
                for a in run_record(pid, run, [3]).attempts:
                    sink.write(a)
    report = evaluate(load_records(path), manifest, runs=3)
    acc = [report.accuracy[s]["all"] for s in SETTINGS]
    assert acc == sorted(acc)
    assert {s: report.accuracy[s]["all"] for s in SETTINGS} == pytest.approx(_recount(path, manifest))


# sampling ---------------------------------------------------------------------

def test_sample_sizes(desk_corpus):
    m = sample(desk_corpus, 10, seed=0)
    assert sum(len(v) for v in m["ids"].values()) == 50
    assert all(len(v) == 10 for v in m["ids"].values())
    levels = {p.id: p.level for p in desk_corpus}
    assert all(levels[i] == int(lv) for lv, ids in m["ids"].items() for i in ids)
    assert sum(len(v) for v in sample(desk_corpus, 20, seed=0)["ids"].values()) == 100


def test_sample_deterministic(desk_corpus):
    assert sample(desk_corpus, 10, seed=3) == sample(desk_corpus, 10, seed=3)
    assert sample(desk_corpus, 10, seed=3) != sample(desk_corpus, 10, seed=4)


def test_insufficient_problems(small_corpus):
    with pytest.raises(InsufficientProblems) as info:
        sample(small_corpus, 10_000)
    assert info.value.level == 1
