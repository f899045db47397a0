"""Command-line entry point: ``geoproof <command> ...``.

Exit codes: 0 success, 1 the task ran but failed (proof rejected, too few
problems, incomplete records), 2 bad usage or configuration.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from geoproof import __version__

log = logging.getLogger("geoproof")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
API_BASE_ENV = "GEOPROOF_LLM_BASE_URL"


class UsageError(Exception):
    pass


# run manifests --------------------------------------------------------------


def _digest(path: str | Path) -> str | None:
    p = Path(path)
    if not p.exists():
        return None
    h = hashlib.sha256()
    files = sorted(q for q in p.rglob("*") if q.is_file()) if p.is_dir() else [p]
    for f in files:
        h.update(f.name.encode())
        h.update(f.read_bytes())
    return h.hexdigest()


_INPUT_ARGS = ("corpus", "source", "problem", "proof", "pairs", "model", "manifest", "records", "dictionary", "replay", "theorems")


def write_manifest(args: argparse.Namespace, outputs: dict[str, str] | None = None) -> Path:
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "verbose") and v is not None}
    config = {k: (str(v) if isinstance(v, Path) else v) for k, v in config.items()}
    inputs = {k: _digest(config[k]) for k in _INPUT_ARGS if isinstance(config.get(k), str)}
    record = {
        "command": args.command,
        "version": __version__,
        "config": config,
        "input_digests": inputs,
        "outputs": outputs or {},
    }
    text = json.dumps(record, sort_keys=True, indent=2)
    key = hashlib.sha256(json.dumps({"c": config, "i": inputs}, sort_keys=True).encode()).hexdigest()[:12]
    out_dir = Path(args.run_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{args.command}-{key}.json"
    path.write_text(text + "\n", encoding="utf-8")
    return path


# helpers --------------------------------------------------------------------


def _corpus(path):
    from geoproof.dataset import load_corpus

    if path is None:
        raise UsageError("--corpus is required")
    if not Path(path).exists():
        raise UsageError(f"corpus not found: {path}")
    return load_corpus(path)


def _dictionary(path):
    from geoproof.dataset import load_theorem_dictionary

    if path is not None and not Path(path).exists():
        raise UsageError(f"theorem dictionary not found: {path}")
    return load_theorem_dictionary(path)


def _model(path):
    from geoproof.regressor import MLPRegressor

    if path is None or not Path(path).exists():
        raise UsageError(f"model weights not found: {path}")
    return MLPRegressor.load(path)


def _read_problem(path: str):
    from geoproof.dataset import load_problem

    p = Path(path)
    if not p.exists():
        raise UsageError(f"problem file not found: {path}")
    text = p.read_text(encoding="utf-8").strip()
    record = json.loads(text.splitlines()[0] if p.suffix == ".jsonl" else text)
    return load_problem(record)


def _select(problems, ids: Sequence[int]):
    by_id = {p.id: p for p in problems}
    missing = [i for i in ids if i not in by_id]
    if missing:
        raise UsageError(f"problem ids not in corpus: {missing[:10]}")
    return [by_id[i] for i in ids]


# commands -------------------------------------------------------------------


def cmd_ingest(args) -> int:
    from geoproof.dataset import anonymize, load_problem, write_corpus

    src = Path(args.source)
    if not src.exists():
        raise UsageError(f"source not found: {src}")
    if src.is_dir():
        files = sorted(src.glob("*.json"), key=lambda f: (len(f.stem), f.stem))
        records = [json.loads(f.read_text(encoding="utf-8")) for f in files]
    else:
        records = [json.loads(line) for line in src.read_text(encoding="utf-8").splitlines() if line.strip()]
    problems, skipped = [], 0
    for r in records:
        try:
            problems.append(load_problem(anonymize(r)))
        except ValueError as exc:
            skipped += 1
            log.warning("skipping problem %s: %s", r.get("problem_id"), exc)
    write_corpus(sorted(problems, key=lambda p: p.id), args.out)
    print(f"wrote {len(problems)} problems to {args.out}" + (f" ({skipped} skipped)" if skipped else ""))
    if args.theorems:
        from geoproof.dataset import dictionary_to_json

        d = _dictionary(args.theorems)
        target = Path(args.out).with_name("theorems.json")
        target.write_text(dictionary_to_json(d), encoding="utf-8")
        print(f"wrote {len(d)} theorem variations to {target}")
    write_manifest(args, {"corpus": str(args.out)})
    return EXIT_OK


def cmd_synth(args) -> int:
    from geoproof.synth import generate_corpus

    records = generate_corpus(args.n, seed=args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r, sort_keys=True, ensure_ascii=False) + "\n")
    print(f"wrote {len(records)} synthetic problems to {out}")
    write_manifest(args, {"corpus": str(out)})
    return EXIT_OK


def cmd_abstract(args) -> int:
    from geoproof.analogy import abstract

    problems = _corpus(args.corpus)
    out = Path(args.out)
    with out.open("w", encoding="utf-8") as fh:
        for p in problems:
            a = abstract(p)
            fh.write(json.dumps({
                "problem_id": p.id,
                "construction": sorted(a.construction_abs.elements()),
                "conditions": sorted(a.conditions_abs.elements()),
                "goal": a.goal_abs,
                "proof": sorted(a.proof_abs.elements()),
            }, ensure_ascii=False) + "\n")
    print(f"wrote {len(problems)} abstracted problems to {out}")
    write_manifest(args, {"abstract": str(out)})
    return EXIT_OK


def cmd_pairs(args) -> int:
    import random

    from geoproof.analogy import build_pair_dataset

    problems = [p for p in _corpus(args.corpus) if p.proof]
    if args.subsample and args.subsample < len(problems):
        problems = sorted(random.Random(args.seed).sample(problems, args.subsample), key=lambda p: p.id)
    ds = build_pair_dataset(problems, balance=not args.no_balance, seed=args.seed, max_pairs=args.max_pairs)
    ds.save(args.out)
    print(f"{ds.total_pairs} pairs from {len(problems)} problems; kept {len(ds)} (bins {ds.bin_counts()}) -> {args.out}")
    write_manifest(args, {"pairs": str(args.out)})
    return EXIT_OK


def cmd_train(args) -> int:
    import time

    from geoproof.analogy import PairDataset, high_score_precision, train_regressor

    if not Path(args.pairs).exists():
        raise UsageError(f"pair dataset not found: {args.pairs}")
    ds = PairDataset.load(args.pairs)
    start = time.perf_counter()
    model = train_regressor(ds, seed=args.seed, epochs=args.epochs, batch_size=args.batch_size, learning_rate=args.lr)
    elapsed = time.perf_counter() - start
    X, y = ds.eval()
    precision, n_high = high_score_precision(model, X, y) if len(y) else (float("nan"), 0)
    model.save(args.out, seed=args.seed, pairs=str(args.pairs), train_rows=int((~ds.is_eval).sum()), seconds=round(elapsed, 3))
    for i, loss in enumerate(model.loss_curve_, 1):
        print(f"epoch {i}: loss {loss:.6f}")
    print(f"eval pairs scored > 0.95: {n_high}; precision (label >= 0.6): {precision:.3f}")
    print(f"trained in {elapsed:.1f}s -> {args.out}")
    write_manifest(args, {"model": str(args.out)})
    return EXIT_OK


def cmd_retrieve(args) -> int:
    from geoproof.analogy import retrieve_top_k

    problems = _corpus(args.corpus)
    model = _model(args.model)
    if args.problem:
        target = _read_problem(args.problem)
    elif args.problem_id is not None:
        target = _select(problems, [args.problem_id])[0]
    else:
        raise UsageError("give --problem or --problem-id")
    for pid, score in retrieve_top_k(target, problems, model, args.k):
        print(f"{pid}\t{score:.6f}")
    write_manifest(args)
    return EXIT_OK


def cmd_coverage(args) -> int:
    from geoproof.analogy import AnalogyIndex, coverage_experiment
    from geoproof.evaluation import sample

    problems = _corpus(args.corpus)
    model = _model(args.model)
    manifest = sample(problems, args.per_level, tuple(args.levels), args.seed)
    chosen = _select(problems, [i for ids in manifest["ids"].values() for i in ids])
    rows = coverage_experiment(chosen, AnalogyIndex(problems), model, args.k, seed=args.seed)
    print(f"{'k':>5} {'analogy cov':>12} {'#thm':>7} {'random cov':>11} {'#thm':>7}")
    for r in rows:
        print(f"{r.k:>5} {100 * r.analogy_coverage:>11.1f}% {r.analogy_theorems:>7.2f} {100 * r.random_coverage:>10.1f}% {r.random_theorems:>7.2f}")
    if args.out:
        Path(args.out).write_text(json.dumps([r.__dict__ for r in rows], indent=2) + "\n", encoding="utf-8")
    write_manifest(args, {"coverage": str(args.out)} if args.out else None)
    return EXIT_OK


def cmd_verify(args) -> int:
    from geoproof.feedback import render_feedback
    from geoproof.prompt import MissingSection, parse_response, parse_theorem_sequence
    from geoproof.verifier import Accepted, Tier1, verify

    problem = _read_problem(args.problem)
    dictionary = _dictionary(args.dictionary)
    claimed = args.answer
    if args.proof is None:
        verdict = verify(problem, claimed=claimed, dictionary=dictionary)
    else:
        path = Path(args.proof)
        if not path.exists():
            raise UsageError(f"proof file not found: {path}")
        text = path.read_text(encoding="utf-8")
        try:
            if "THEOREM_SEQUENCE" in text:
                response = parse_response(text)
                steps, problems = response.proof, response.diagnostics
                claimed = claimed if claimed is not None else response.answer
            else:
                steps, problems = parse_theorem_sequence(text)
        except MissingSection as exc:
            steps, problems = (), [f"The response has no {exc.name} section."]
        verdict = Tier1(0, problems[0]) if problems else verify(problem, steps, claimed=claimed, dictionary=dictionary)
    write_manifest(args)
    if isinstance(verdict, Accepted):
        print("Accepted")
        return EXIT_OK
    sys.stdout.write(render_feedback(verdict).text)
    return EXIT_FAIL


def cmd_sample(args) -> int:
    from geoproof.evaluation import InsufficientProblems, sample

    problems = _corpus(args.corpus)
    try:
        manifest = sample(problems, args.per_level, tuple(args.levels), args.seed)
    except InsufficientProblems as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    Path(args.out).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"sampled {sum(len(v) for v in manifest['ids'].values())} problems -> {args.out}")
    write_manifest(args, {"manifest": str(args.out)})
    return EXIT_OK


def _client(args):
    import os

    from geoproof.llm import HttpChatClient, ReplayClient

    if args.replay:
        if not Path(args.replay).is_dir():
            raise UsageError(f"replay directory not found: {args.replay}")
        default = Path(args.replay_default).read_text(encoding="utf-8") if args.replay_default else None
        return ReplayClient.from_directory(args.replay, default)
    base = args.base_url or os.environ.get(API_BASE_ENV)
    if not base or not args.llm_model:
        raise UsageError(f"give --replay DIR, or --llm-model with --base-url (or ${API_BASE_ENV})")
    return HttpChatClient(base, args.llm_model, temperature=args.temperature, audit_path=args.audit)


def cmd_solve(args) -> int:
    from geoproof.analogy import AnalogyIndex
    from geoproof.evaluation import manifest_ids
    from geoproof.orchestrator import RecordSink, SolveConfig, plan_prompt, solve_many

    problems = _corpus(args.corpus)
    dictionary = _dictionary(args.dictionary)
    client = _client(args)
    if args.manifest:
        ids = sorted(manifest_ids(json.loads(Path(args.manifest).read_text(encoding="utf-8"))))
    elif args.problem_id:
        ids = args.problem_id
    else:
        raise UsageError("give --manifest or --problem-id")
    targets = _select(problems, ids)
    config = SolveConfig(
        k_examples=args.k_examples, k_narrow=args.k_narrow, retries=args.retries, runs=args.runs,
        analogy=not args.no_analogy, seed=args.seed, token_budget=args.token_budget,
    )
    model = None if args.no_analogy else _model(args.model)
    index = AnalogyIndex(problems)
    plans = {t.id: plan_prompt(t, index, model, dictionary, config) for t in targets}
    out = Path(args.records)
    if out.exists() and not args.append:
        out.unlink()
    records = solve_many(targets, client, plans, dictionary, config, RecordSink(out), workers=args.workers)
    solved = {r.problem_id for r in records if r.solved}
    print(f"solved {len(solved)}/{len(targets)}; {sum(len(r.attempts) for r in records)} attempts -> {out}")
    write_manifest(args, {"records": str(out)})
    return EXIT_OK


def cmd_evaluate(args) -> int:
    from geoproof.evaluation import IncompleteRecords, evaluate
    from geoproof.orchestrator import load_records

    for f in (args.records, args.manifest):
        if not Path(f).exists():
            raise UsageError(f"file not found: {f}")
    records = load_records(args.records)
    manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
    try:
        report = evaluate(records, manifest, runs=args.runs)
    except IncompleteRecords as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    text = report.to_text()
    sys.stdout.write(text)
    prefix = Path(args.out)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    prefix.with_suffix(".txt").write_text(text, encoding="utf-8")
    prefix.with_suffix(".json").write_text(report.to_json() + "\n", encoding="utf-8")
    write_manifest(args, {"report_text": str(prefix.with_suffix(".txt")), "report_json": str(prefix.with_suffix(".json"))})
    return EXIT_OK


# parser ---------------------------------------------------------------------


def _levels(text: str) -> list[int]:
    if "-" in text:
        lo, hi = text.split("-", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(x) for x in text.split(",") if x]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="geoproof", description="Analogy-guided geometry proof generation and verification.")
    parser.add_argument("--version", action="version", version=f"geoproof {__version__}")
    parser.add_argument("--config", help="JSON file of option defaults, keyed by command name")
    parser.add_argument("--run-dir", default="runs", help="where run manifests are written (default: runs)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="normalise a FormalGeo problem directory or JSON-lines file")
    p.add_argument("--source", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--theorems", help="theorem dictionary (GDL JSON) to validate and copy")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", help="generate a synthetic corpus with ground-truth proofs")
    p.add_argument("--n", type=int, default=3000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("abstract", help="write abstracted problems")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_abstract)

    p = sub.add_parser("pairs", help="build the pairwise similarity dataset")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-balance", action="store_true")
    p.add_argument("--subsample", type=int, help="use this many problems (desk scale)")
    p.add_argument("--max-pairs", type=int)
    p.set_defaults(func=cmd_pairs)

    p = sub.add_parser("train", help="train the proof-similarity regressor")
    p.add_argument("--pairs", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=1e-3)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("retrieve", help="rank analogous problems for one target")
    p.add_argument("--corpus", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--problem", help="target problem JSON file")
    p.add_argument("--problem-id", type=int, help="target problem id in the corpus")
    p.add_argument("--k", type=int, default=5)
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("coverage", help="analogy against random dictionary coverage")
    p.add_argument("--corpus", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--per-level", type=int, default=20)
    p.add_argument("--levels", type=_levels, default=[1, 2, 3, 4, 5])
    p.add_argument("--k", type=_ints, default=[20, 50, 100])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_coverage)

    p = sub.add_parser("verify", help="check a proof; exit 0 only when accepted")
    p.add_argument("--problem", required=True, help="problem JSON file")
    p.add_argument("--proof", help="THEOREM_SEQUENCE text or a model response (default: the problem's own proof)")
    p.add_argument("--answer", help="claimed answer (default: the response's ANSWER or the problem's answer)")
    p.add_argument("--dictionary")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sample", help="stratified sample manifest")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--per-level", type=int, default=10)
    p.add_argument("--levels", type=_levels, default=[1, 2, 3, 4, 5])
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("solve", help="run the prompt-verify-retry loop")
    p.add_argument("--corpus", required=True)
    p.add_argument("--model", help="regressor weights (not needed with --no-analogy)")
    p.add_argument("--manifest")
    p.add_argument("--problem-id", type=_ints)
    p.add_argument("--dictionary")
    p.add_argument("--records", required=True, help="attempt log (JSON lines)")
    p.add_argument("--append", action="store_true", help="append to an existing attempt log")
    p.add_argument("--replay", help="directory of scripted responses <problem>_<run>_<retry>.txt")
    p.add_argument("--replay-default", help="response file used when no script entry matches")
    p.add_argument("--base-url")
    p.add_argument("--llm-model")
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--audit", help="file receiving raw requests and responses")
    p.add_argument("--k-examples", type=int, default=5)
    p.add_argument("--k-narrow", type=int, default=100)
    p.add_argument("--retries", type=int, default=5)
    p.add_argument("--runs", type=int, default=3)
    p.add_argument("--no-analogy", action="store_true", help="random examples and the full dictionary")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--token-budget", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("evaluate", help="accuracy report from an attempt log")
    p.add_argument("--records", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--runs", type=int, default=3)
    p.add_argument("--out", default="report", help="report path prefix; .txt and .json are written")
    p.set_defaults(func=cmd_evaluate)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if not args.config:
        return args
    path = Path(args.config)
    if not path.exists():
        raise UsageError(f"config file not found: {path}")
    try:
        config = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file is not valid JSON: {exc}") from exc
    defaults = {**config.get("*", {}), **config.get(args.command, {})}
    sub = next(a for a in parser._subparsers._group_actions if isinstance(a, argparse._SubParsersAction))
    subparser = sub.choices[args.command]
    known = {a.dest for a in subparser._actions}
    unknown = set(k.replace("-", "_") for k in defaults) - known
    if unknown:
        raise UsageError(f"unknown options in config for {args.command}: {sorted(unknown)}")
    subparser.set_defaults(**{k.replace("-", "_"): v for k, v in defaults.items()})
    return parser.parse_args(argv)  # flags given on the command line still win


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _apply_config(parser, argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_USAGE
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
