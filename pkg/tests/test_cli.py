import json
import subprocess
import sys

import pytest

from hopsynth.cli import main

from synthcorpus import make_corpus, write_corpus


@pytest.fixture(scope="module")
def corpus_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("clicorpus") / "corpus.jsonl"
    write_corpus(path, make_corpus(n_docs=40, seed=5, n_topics=4))
    return path


def test_module_invocation_smoke(tmp_path, corpus_path):
    out = subprocess.run(
        [sys.executable, "-m", "hopsynth.cli", "ingest",
         "--in", str(corpus_path), "--out", str(tmp_path / "store.jsonl")],
        capture_output=True, text=True,
    )
    assert out.returncode == 0, out.stderr
    assert "ingested" in out.stdout
    bad = subprocess.run(
        [sys.executable, "-m", "hopsynth.cli", "nonsense"],
        capture_output=True, text=True,
    )
    assert bad.returncode == 1


def test_unknown_subcommand_usage_error(capsys):
    assert main(["frobnicate"]) == 1
    assert "usage" in capsys.readouterr().err.lower()


def test_missing_subcommand(capsys):
    assert main([]) == 1


def test_unknown_flag(capsys):
    assert main(["--bogus", "stats"]) == 1


def test_runtime_failure_exit_2(tmp_path, capsys):
    assert main(["stats", "--in", str(tmp_path / "missing.jsonl")]) == 2


def test_stage_chain(tmp_path, corpus_path, capsys):
    base = [
        "--seed", "3", "--task", "mqa", "--backend", "mock", "--embeddings", "mock",
        "--workers", "1",
    ]
    store = tmp_path / "store.jsonl"
    pairs = tmp_path / "pairs.jsonl"
    drafts = tmp_path / "drafts.jsonl"
    decisions = tmp_path / "decisions.jsonl"
    candidates = tmp_path / "candidates.jsonl"
    instances = tmp_path / "instances.jsonl"

    assert main(base + ["ingest", "--in", str(corpus_path), "--out", str(store)]) == 0
    assert main(base + ["pair", "--store", str(store), "--out", str(pairs)]) == 0
    assert main(base + [
        "gen-questions", "--store", str(store), "--in", str(pairs), "--out", str(drafts),
    ]) == 0
    assert main(base + [
        "filter-answers", "--store", str(store), "--in", str(drafts), "--out", str(decisions),
    ]) == 0
    assert main(base + [
        "gen-queries", "--store", str(store), "--in", str(decisions), "--out", str(candidates),
    ]) == 0
    report = tmp_path / "verify_report.json"
    assert main(base + [
        "verify", "--store", str(store), "--in", str(candidates),
        "--out", str(instances), "--report", str(report),
    ]) == 0
    emitted = [json.loads(l) for l in instances.read_text().splitlines()]
    assert emitted
    for row in emitted:
        assert set(row) == {
            "id", "task", "relation", "question", "answer", "hops", "source_pair", "n_hops",
        }
    counters = json.loads(report.read_text())
    assert counters["emitted"] == len(emitted)

    out_dir = tmp_path / "splits"
    assert main(base + [
        "emit", "--in", str(instances), "--out", str(out_dir), "--dev-size", "2",
    ]) == 0
    assert len((out_dir / "dev.jsonl").read_text().splitlines()) == 2

    capsys.readouterr()
    assert main(base + ["stats", "--in", str(instances)]) == 0
    stats_out = capsys.readouterr().out
    assert "Size of Train Set" in stats_out
    assert "#SQ Data" in stats_out


def test_stage_rerun_reproduces_output(tmp_path, corpus_path):
    base = ["--seed", "9", "--backend", "mock", "--embeddings", "mock", "--workers", "2"]
    store = tmp_path / "store.jsonl"
    main(base + ["ingest", "--in", str(corpus_path), "--out", str(store)])
    p1, p2 = tmp_path / "p1.jsonl", tmp_path / "p2.jsonl"
    assert main(base + ["pair", "--store", str(store), "--out", str(p1)]) == 0
    assert main(base + ["pair", "--store", str(store), "--out", str(p2)]) == 0
    assert p1.read_bytes() == p2.read_bytes()


def test_run_all_twice_byte_identical(tmp_path, corpus_path):
    base = [
        "--seed", "7", "--backend", "mock", "--embeddings", "mock", "--workers", "2",
        "run-all", "--in", str(corpus_path), "--dev-size", "3",
    ]
    assert main(base + ["--out", str(tmp_path / "r1")]) == 0
    assert main(base + ["--out", str(tmp_path / "r2")]) == 0
    for name in ("train.jsonl", "dev.jsonl"):
        assert (tmp_path / "r1" / name).read_bytes() == (tmp_path / "r2" / name).read_bytes()
    report = json.loads((tmp_path / "r1" / "report.json").read_text())
    assert report["conserved"] is True


def test_config_file_and_flag_override(tmp_path, corpus_path):
    config_file = tmp_path / "config.txt"
    config_file.write_text(
        "# pipeline config\n"
        "seed = 5\n"
        "task = mqa\n"
        "backend.kind = mock\n"
        "embeddings.kind = mock\n"
        "pairing.pairs_per_document = 1\n"
        "verify.k = 3\n"
        "workers = 1\n"
    )
    out = tmp_path / "cfg_out"
    assert main([
        "--config", str(config_file), "run-all",
        "--in", str(corpus_path), "--out", str(out), "--dev-size", "0",
    ]) == 0
    rows = [json.loads(l) for l in (out / "train.jsonl").read_text().splitlines()]
    assert all(len(h["retrieved"]) <= 3 for r in rows for h in r["hops"])


def test_config_unknown_key(tmp_path, corpus_path):
    config_file = tmp_path / "bad.txt"
    config_file.write_text("no.such.key = 1\n")
    assert main([
        "--config", str(config_file), "stats", "--in", str(corpus_path),
    ]) == 2


def test_eval_cli_with_scripted_backend(tmp_path, corpus_path):
    records = make_corpus(n_docs=10, seed=1, n_topics=2)
    eval_corpus = tmp_path / "eval_corpus.jsonl"
    write_corpus(eval_corpus, records)
    items = []
    script = {}
    for i, record in enumerate(records[:5]):
        question = f"What is fact {i} about {record['title']}?"
        items.append({"id": f"q{i}", "question": question, "answer": record["title"]})
        script[question] = {"queries": [record["title"]], "answer": record["title"]}
    eval_set = tmp_path / "evalset.jsonl"
    eval_set.write_text("".join(json.dumps(i) + "\n" for i in items))
    script_path = tmp_path / "script.json"
    script_path.write_text(json.dumps(script))
    config_file = tmp_path / "eval_config.txt"
    config_file.write_text(
        "backend.kind = mock\n"
        f"backend.mock_script = {script_path}\n"
        "embeddings.kind = mock\n"
        "eval.max_hops = 2\n"
        "workers = 1\n"
    )
    report_path = tmp_path / "report.json"
    assert main([
        "--config", str(config_file), "--seed", "1", "eval",
        "--in", str(eval_set), "--corpus", str(eval_corpus), "--out", str(report_path),
    ]) == 0
    report = json.loads(report_path.read_text())
    assert report["em"] == 100.0
    assert report["f1"] == 100.0
    assert len(report["items"]) == 5
