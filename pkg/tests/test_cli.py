import json
import shutil

import pytest

from geoproof.cli import EXIT_FAIL, EXIT_OK, EXIT_USAGE, main
from geoproof.evaluation import manifest_ids
from geoproof.dataset import load_corpus, load_theorem_dictionary
from geoproof.prompt import format_response

from conftest import FIXTURES, GOLDEN


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    run = ["--run-dir", str(d / "runs")]
    assert main([*run, "synth", "--n", "400", "--seed", "3", "--out", str(d / "corpus.jsonl")]) == EXIT_OK
    assert main([*run, "pairs", "--corpus", str(d / "corpus.jsonl"), "--out", str(d / "pairs.tsv")]) == EXIT_OK
    assert main([*run, "train", "--pairs", str(d / "pairs.tsv"), "--out", str(d / "model.bin"), "--epochs", "2"]) == EXIT_OK
    return d


def run(workdir, *args):
    return main(["--run-dir", str(workdir / "runs"), *args])


@pytest.mark.parametrize("tier", [1, 2, 3])
def test_verify_prints_feedback(tier, capsys, tmp_path):
    code = main(["--run-dir", str(tmp_path), "verify",
                 "--problem", str(FIXTURES / "feedback" / f"tier{tier}_problem.json"),
                 "--proof", str(FIXTURES / "feedback" / f"tier{tier}_proof.txt")])
    assert code == EXIT_FAIL
    assert capsys.readouterr().out == (GOLDEN / f"tier{tier}.txt").read_text()


def test_verify_accepts_ground_truth(capsys, tmp_path):
    assert main(["--run-dir", str(tmp_path), "verify", "--problem", str(FIXTURES / "nested_parallels.json")]) == EXIT_OK
    assert capsys.readouterr().out == "Accepted\n"


def test_verify_full_response(tmp_path, nested, dictionary):
    resp = tmp_path / "resp.txt"
    resp.write_text(format_response(nested, dictionary, answer="10"))
    code = main(["--run-dir", str(tmp_path), "verify", "--problem", str(FIXTURES / "nested_parallels.json"), "--proof", str(resp)])
    assert code == EXIT_FAIL


def test_usage_errors(tmp_path, capsys):
    assert main(["--run-dir", str(tmp_path), "verify", "--problem", str(tmp_path / "none.json")]) == EXIT_USAGE
    assert main(["bogus"]) == EXIT_USAGE
    assert main(["--help"]) == EXIT_OK


def test_run_manifest_written(workdir):
    manifests = sorted((workdir / "runs").glob("train-*.json"))
    m = json.loads(manifests[0].read_text())
    assert m["command"] == "train" and m["config"]["seed"] == 0
    assert len(m["input_digests"]["pairs"]) == 64
    assert "time" not in json.dumps(m).lower() or "timestamp" not in m


def test_manifest_is_reproducible(workdir, tmp_path):
    out = tmp_path / "c.jsonl"
    for _ in range(2):
        assert run(workdir, "synth", "--n", "20", "--seed", "9", "--out", str(out)) == EXIT_OK
    assert len([p for p in (workdir / "runs").glob("synth-*.json")]) == 2  # the fixture's run and this one


def test_abstract_and_retrieve(workdir, capsys):
    assert run(workdir, "abstract", "--corpus", str(workdir / "corpus.jsonl"), "--out", str(workdir / "abs.jsonl")) == EXIT_OK
    line = json.loads((workdir / "abs.jsonl").read_text().splitlines()[0])
    assert all("<word>" in s or "<num>" in s or "(" in s for s in line["construction"])
    capsys.readouterr()
    assert run(workdir, "retrieve", "--corpus", str(workdir / "corpus.jsonl"), "--model", str(workdir / "model.bin"),
               "--problem-id", "3", "--k", "4") == EXIT_OK
    rows = capsys.readouterr().out.splitlines()
    assert len(rows) == 4 and all(int(r.split("\t")[0]) != 3 for r in rows)


def test_coverage(workdir, capsys):
    out = workdir / "cov.json"
    assert run(workdir, "coverage", "--corpus", str(workdir / "corpus.jsonl"), "--model", str(workdir / "model.bin"),
               "--per-level", "2", "--k", "5,20", "--out", str(out)) == EXIT_OK
    assert [r["k"] for r in json.loads(out.read_text())] == [5, 20]


def test_sample_solve_evaluate(workdir, capsys):
    manifest = workdir / "manifest.json"
    assert run(workdir, "sample", "--corpus", str(workdir / "corpus.jsonl"), "--out", str(manifest), "--per-level", "1") == EXIT_OK
    assert run(workdir, "sample", "--corpus", str(workdir / "corpus.jsonl"), "--out", str(workdir / "x.json"), "--per-level", "999") == EXIT_FAIL

    problems = {p.id: p for p in load_corpus(workdir / "corpus.jsonl")}
    d = load_theorem_dictionary()
    replay = workdir / "replay"
    replay.mkdir()
    for pid in manifest_ids(json.loads(manifest.read_text())):
        (replay / f"{pid}_1_0.txt").write_text(format_response(problems[pid], d))
    records = workdir / "records.jsonl"
    assert run(workdir, "solve", "--corpus", str(workdir / "corpus.jsonl"), "--model", str(workdir / "model.bin"),
               "--manifest", str(manifest), "--records", str(records), "--replay", str(replay), "--workers", "2") == EXIT_OK
    assert run(workdir, "evaluate", "--records", str(records), "--manifest", str(manifest), "--out", str(workdir / "rep" / "report")) == EXIT_OK
    report = json.loads((workdir / "rep" / "report.json").read_text())
    assert report["accuracy"]["first_run_no_retries"]["all"] == 100.0
    assert (workdir / "rep" / "report.txt").read_text().startswith("Proof accuracy")

    shutil.copy(manifest, workdir / "bigger.json")
    m = json.loads(manifest.read_text())
    m["ids"]["1"].append(max(problems))
    (workdir / "bigger.json").write_text(json.dumps(m))
    assert run(workdir, "evaluate", "--records", str(records), "--manifest", str(workdir / "bigger.json"), "--out", str(workdir / "r2")) == EXIT_FAIL


def test_solve_needs_a_client(workdir):
    assert run(workdir, "solve", "--corpus", str(workdir / "corpus.jsonl"), "--no-analogy",
               "--problem-id", "1", "--records", str(workdir / "r.jsonl")) == EXIT_USAGE


def test_config_file_and_override(workdir, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"sample": {"per_level": 2, "seed": 5}}))
    out = tmp_path / "m.json"
    assert main(["--run-dir", str(tmp_path), "--config", str(cfg), "sample", "--corpus", str(workdir / "corpus.jsonl"), "--out", str(out)]) == EXIT_OK
    m = json.loads(out.read_text())
    assert m["per_level"] == 2 and m["seed"] == 5
    assert main(["--run-dir", str(tmp_path), "--config", str(cfg), "sample", "--corpus", str(workdir / "corpus.jsonl"),
                 "--out", str(out), "--seed", "6"]) == EXIT_OK
    assert json.loads(out.read_text())["seed"] == 6
    cfg.write_text(json.dumps({"sample": {"nonsense": 1}}))
    assert main(["--config", str(cfg), "sample", "--corpus", "x", "--out", "y"]) == EXIT_USAGE


def test_ingest_anonymises(tmp_path):
    src = tmp_path / "raw"
    src.mkdir()
    rec = json.loads((FIXTURES / "nested_parallels.json").read_text())
    rec["annotation"] = "someone_2023-01-01"
    (src / "9001.json").write_text(json.dumps(rec))
    out = tmp_path / "corpus.jsonl"
    assert main(["--run-dir", str(tmp_path), "ingest", "--source", str(src), "--out", str(out)]) == EXIT_OK
    assert "annotation" not in out.read_text()
    assert load_corpus(out)[0].id == 9001
