import json

from click.testing import CliRunner

from copyfaith.cli import main
from copyfaith.jsonio import write_jsonl

PAIRS = [
    {
        "id": "p1",
        "query": "What rose to 42 megawatts?",
        "context": (
            "The reactor output rose to 42 megawatts during the second trial. "
            "Engineers logged the rise in the nightly report."
        ),
        "gold_answer": "the reactor output",
        "wrong_answers": ["the coolant temperature"],
    },
    {
        "id": "p2",
        "query": "Who logged the rise?",
        "context": (
            "Engineers logged the rise in the nightly report. "
            "The reactor output rose to 42 megawatts during the second trial."
        ),
    },
]

CONFIG = """
[pipeline]
concurrency = 1

[filters]
faith_doc = 0.0
faith_sent = 0.0
coverage = 0.0
density = 0.0
relevance = -1.0
fluency_ppl = 1000.0
"""


def write_inputs(tmp_path):
    pairs_path = tmp_path / "pairs.jsonl"
    write_jsonl(pairs_path, PAIRS)
    config_path = tmp_path / "config.toml"
    config_path.write_text(CONFIG)
    return str(pairs_path), str(config_path)


def test_fragments_command(tmp_path):
    out = tmp_path / "frags.jsonl"
    result = CliRunner().invoke(
        main,
        [
            "fragments",
            "--context",
            "the cat sat on the mat",
            "--answer",
            "the cat on the mat",
            "--out",
            str(out),
        ],
    )
    assert result.exit_code == 0, result.output
    rows = [json.loads(l) for l in out.read_text().splitlines()]
    assert [r["surface"] for r in rows] == ["the cat", "on the mat"]
    manifest = json.loads((tmp_path / "frags.jsonl.manifest.json").read_text())
    assert manifest["command"] == "fragments"
    assert manifest["counts"]["fragments"] == 2


def test_generate_then_score_csv(tmp_path):
    pairs_path, config_path = write_inputs(tmp_path)
    cands = tmp_path / "cands.jsonl"
    result = CliRunner().invoke(
        main, ["--config", config_path, "generate", "--pairs", pairs_path, "--out", str(cands)]
    )
    assert result.exit_code == 0, result.output
    rows = [json.loads(l) for l in cands.read_text().splitlines()]
    assert len(rows) == 12  # 2 pairs x 6 methods

    out = tmp_path / "scores.csv"
    result = CliRunner().invoke(
        main,
        [
            "--config",
            config_path,
            "score",
            "--candidates",
            str(cands),
            "--pairs",
            pairs_path,
            "--out",
            str(out),
        ],
    )
    assert result.exit_code == 0, result.output
    lines = out.read_text().splitlines()
    assert lines[0] == "candidate_id,pair_id,method,coverage,density,sigma,status"
    assert len(lines) == 13
    assert (tmp_path / "scores.png").exists()


def test_rank_command(tmp_path):
    pairs_path, config_path = write_inputs(tmp_path)
    cands = tmp_path / "cands.jsonl"
    CliRunner().invoke(
        main, ["--config", config_path, "generate", "--pairs", pairs_path, "--out", str(cands)]
    )
    out = tmp_path / "ratings.jsonl"
    result = CliRunner().invoke(
        main,
        ["--config", config_path, "rank", "--candidates", str(cands), "--pairs", pairs_path, "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    rows = [json.loads(l) for l in out.read_text().splitlines()]
    assert len(rows) == 12
    for row in rows:
        assert {"rating_twist", "rating_causal", "rating_mean", "games"} <= set(row)
    by_pair = {}
    for row in rows:
        by_pair.setdefault(row["pair_id"], []).append(row["rating_mean"])
    for ratings in by_pair.values():
        assert sum(ratings) == pytest_approx(1500 * len(ratings))


def pytest_approx(x):
    import pytest

    return pytest.approx(x, abs=1e-9)


def test_build_prefs_happy_path(tmp_path):
    pairs_path, config_path = write_inputs(tmp_path)
    out = tmp_path / "prefs.jsonl"
    result = CliRunner().invoke(
        main, ["--config", config_path, "build-prefs", "--pairs", pairs_path, "--out", str(out)]
    )
    assert result.exit_code == 0, result.output
    rows = [json.loads(l) for l in out.read_text().splitlines()]
    assert len(rows) == 10  # five pairs per sample, two samples
    manifest = json.loads((tmp_path / "prefs.jsonl.manifest.json").read_text())
    assert manifest["counts"]["preference_pairs"] == 10
    assert manifest["counts"]["samples_skipped"] == 0
    assert manifest["config_hash"]


def test_build_prefs_partial_failure_exit_code(tmp_path):
    pairs_path, _ = write_inputs(tmp_path)
    config_path = tmp_path / "strict.toml"
    config_path.write_text("[filters]\ndensity = 100000.0\n")
    out = tmp_path / "prefs.jsonl"
    result = CliRunner().invoke(
        main, ["--config", str(config_path), "build-prefs", "--pairs", pairs_path, "--out", str(out)]
    )
    assert result.exit_code == 1
    manifest = json.loads((tmp_path / "prefs.jsonl.manifest.json").read_text())
    assert manifest["counts"]["samples_skipped"] == 2
    assert manifest["skips"][0]["reason"] == "insufficient survivors"


def test_build_prefs_concurrency_matches_sequential(tmp_path):
    pairs_path, _ = write_inputs(tmp_path)
    outputs = {}
    for name, extra in (("seq", "concurrency = 1"), ("par", "concurrency = 4")):
        config_path = tmp_path / f"{name}.toml"
        config_path.write_text(CONFIG.replace("concurrency = 1", extra))
        out = tmp_path / f"{name}.jsonl"
        result = CliRunner().invoke(
            main, ["--config", str(config_path), "build-prefs", "--pairs", pairs_path, "--out", str(out)]
        )
        assert result.exit_code == 0, result.output
        outputs[name] = out.read_bytes()
    assert outputs["seq"] == outputs["par"]


def test_missing_config_is_fatal(tmp_path):
    result = CliRunner().invoke(main, ["--config", "/nonexistent.toml", "score", "--candidates", "x", "--pairs", "y", "--out", "z"])
    assert result.exit_code == 2


def test_unknown_subcommand_usage_error():
    result = CliRunner().invoke(main, ["frobnicate"])
    assert result.exit_code == 2


def test_capture_command_multi_pair(tmp_path):
    import csv

    import numpy as np

    from copyfaith.traceio import write_trace

    contexts = {
        "q1": "Paris is the capital of France.",
        "q2": "Amylase digests starch into simpler sugars.",
    }
    para_texts = {"q1": "The capital of France is Rome", "q2": "Pepsin digests proteins mostly"}
    topk_by_query = {
        "q1": [[(" the", 0.5), (" paris", 0.3), (" rome", 0.1)]],
        "q2": [[(" amylase", 0.6), (" pepsin", 0.2), (" x", 0.1)]],
    }
    args = []
    for qid, ctx_text in contexts.items():
        ctx_file = tmp_path / f"{qid}.txt"
        ctx_file.write_text(ctx_text)
        for tag, with_ctx in (("ctx", True), ("para", False)):
            write_trace(
                tmp_path / f"{qid}.{tag}.jsonl",
                run_id=f"{qid}-{tag}",
                query_id=qid,
                with_context=with_ctx,
                model_id="m",
                hidden_dim=4,
                k=3,
                generated_text=para_texts[qid] if not with_ctx else "",
                steps=[(topk, np.zeros(4)) for topk in topk_by_query[qid]],
            )
        args += ["--pair", str(tmp_path / f"{qid}.ctx.jsonl"), str(tmp_path / f"{qid}.para.jsonl"), str(ctx_file)]

    out = tmp_path / "cap"
    result = CliRunner().invoke(main, ["capture", *args, "--out", str(out), "--k", "3"])
    assert result.exit_code == 0, result.output
    events = [json.loads(l) for l in (tmp_path / "cap.events.jsonl").read_text().splitlines()]
    assert {e["query_id"] for e in events} == {"q1", "q2"}
    assert {e["token"] for e in events} == {"paris", "amylase"}
    with open(tmp_path / "cap.profile.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert rows[0]["n_ctx"] == "2"  # both samples captured at position 0
    assert (tmp_path / "cap.profile.png").exists()


def test_capture_command_bad_trace_is_fatal(tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text("not json\n")
    ctx_file = tmp_path / "ctx.txt"
    ctx_file.write_text("context words")
    result = CliRunner().invoke(
        main, ["capture", "--pair", str(bad), str(bad), str(ctx_file), "--out", str(tmp_path / "cap")]
    )
    assert result.exit_code == 2


def test_eval_command(tmp_path):
    items = [
        {
            "id": "e1",
            "query": "Where is the Louvre?",
            "context": "The Louvre is in Paris.",
            "gold_answer_text": "Paris",
            "options": [["A", "Paris"], ["B", "Rome"]],
            "gold_label": "A",
        }
    ]
    items_path = tmp_path / "items.jsonl"
    write_jsonl(items_path, items)
    out = tmp_path / "outcomes.jsonl"
    report = tmp_path / "report.csv"
    result = CliRunner().invoke(
        main,
        ["eval", "--items", str(items_path), "--mode", "both", "--out", str(out), "--report", str(report)],
    )
    assert result.exit_code == 0, result.output
    rows = [json.loads(l) for l in out.read_text().splitlines()]
    assert len(rows) == 2  # one hit outcome, one accuracy outcome
    assert report.exists()
