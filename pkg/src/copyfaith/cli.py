"""Command-line interface: the pipeline as subcommands over one config.

Exit codes: 0 success, 1 partial failure (some samples skipped or
failed), 2 fatal configuration or I/O errors. Every run writes a
machine-readable manifest next to its primary output.
"""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click

from .capture import capture as run_capture, position_power_profile
from .config import PipelineConfig, load_config
from .errors import ConfigError, CopyFaithError
from .evalkit import EvalItem, aggregate, eval_accuracy, eval_hit, write_report_csv
from .fragments import detect_fragments, fragment_raw_spans
from .jsonio import load_pairs, read_jsonl, write_jsonl
from .judge import run_tournament
from .metrics import copy_metrics, copy_score
from .prefbuild import Candidate, CandidateStatus, build_sample, export_dataset
from .promptgen import CandidateMethod, QueryContextPair, candidate_copy_metrics
from .textseg import tokenize
from .traceio import read_trace


def _write_manifest(primary_out: str, command: str, cfg: PipelineConfig, inputs: list[str], counts: dict, skips: list) -> None:
    manifest = {
        "command": command,
        "inputs": sorted(inputs),
        "config_hash": cfg.config_hash(),
        "counts": counts,
        "skips": skips,
        "created_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    Path(f"{primary_out}.manifest.json").write_text(
        json.dumps(manifest, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )


def _read_text_arg(inline: str | None, file_path: str | None, name: str) -> str:
    if (inline is None) == (file_path is None):
        raise click.UsageError(f"provide exactly one of --{name} or --{name}-file")
    if inline is not None:
        return inline
    return Path(file_path).read_text(encoding="utf-8")


@click.group()
@click.option("--config", "config_path", type=str, default=None, help="Pipeline TOML config file.")
@click.pass_context
def main(ctx, config_path):
    """Copy-based contextual faithfulness pipeline."""
    try:
        ctx.obj = load_config(config_path)
    except ConfigError as exc:
        click.echo(f"error: {exc}", err=True)
        ctx.exit(2)


@main.command()
@click.option("--context", "context_text", default=None)
@click.option("--context-file", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--answer", "answer_text", default=None)
@click.option("--answer-file", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--out", required=True, type=str)
@click.pass_obj
def fragments(cfg: PipelineConfig, context_text, context_file, answer_text, answer_file, out):
    """Emit copied fragments linking an answer to its context as JSONL."""
    context = tokenize(_read_text_arg(context_text, context_file, "context"))
    answer = tokenize(_read_text_arg(answer_text, answer_file, "answer"))
    fragset = detect_fragments(context, answer)
    rows = [fragment_raw_spans(f, context, answer) for f in fragset.fragments]
    count = write_jsonl(out, rows)
    m = copy_metrics(fragset)
    _write_manifest(
        out,
        "fragments",
        cfg,
        [p for p in (context_file, answer_file) if p],
        {"fragments": count, "coverage": m.coverage, "density": m.density},
        [],
    )
    click.echo(f"wrote {count} fragments to {out}")


@main.command()
@click.option("--candidates", "candidates_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--pairs", "pairs_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=str)
@click.option("--plot/--no-plot", default=True, show_default=True)
@click.pass_obj
def score(cfg: PipelineConfig, candidates_path, pairs_path, out, plot):
    """Score candidates: coverage, density, and composite copy score."""
    pairs = {p.id: p for p in load_pairs(pairs_path)}
    rows = []
    skips = []
    for raw in read_jsonl(candidates_path):
        cand = Candidate.from_dict(raw)
        pair = pairs.get(cand.pair_id)
        if pair is None:
            skips.append({"candidate_id": cand.candidate_id, "reason": "unknown pair_id"})
            continue
        m = candidate_copy_metrics(pair, cand.method, cand.text)
        rows.append(
            {
                "candidate_id": cand.candidate_id,
                "pair_id": cand.pair_id,
                "method": cand.method.value,
                "coverage": m.coverage,
                "density": m.density,
                "sigma": copy_score(m, cfg.score_cfg),
                "status": cand.status.value,
            }
        )
    if out.endswith(".jsonl"):
        write_jsonl(out, rows)
    else:
        with open(out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(
                fh, fieldnames=["candidate_id", "pair_id", "method", "coverage", "density", "sigma", "status"]
            )
            writer.writeheader()
            writer.writerows(rows)
    if plot and rows:
        from .report import save_score_scatter

        save_score_scatter(rows, Path(out).with_suffix(".png"))
    _write_manifest(out, "score", cfg, [candidates_path, pairs_path], {"scored": len(rows)}, skips)
    click.echo(f"scored {len(rows)} candidates -> {out}")


def _parse_methods(labels: str | None) -> list[CandidateMethod]:
    if not labels:
        return list(CandidateMethod)
    return [CandidateMethod.from_label(label.strip()) for label in labels.split(",")]


@main.command()
@click.option("--pairs", "pairs_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=str)
@click.option("--methods", default=None, help="Comma-separated method labels (default: all six).")
@click.pass_context
def generate(ctx, pairs_path, out, methods):
    """Generate candidates for each pair with the selected strategies."""
    cfg: PipelineConfig = ctx.obj
    from .promptgen import generate_candidate

    pairs = load_pairs(pairs_path)
    wanted = _parse_methods(methods)
    clients = cfg.make_clients()
    templates = cfg.templates()

    def run_pair(pair: QueryContextPair) -> list[Candidate]:
        return [
            generate_candidate(
                pair, m, clients.generator, templates, cfg.score_cfg, cfg.t_max, cfg.generator.temperature
            )
            for m in wanted
        ]

    if cfg.concurrency > 1:
        with ThreadPoolExecutor(max_workers=cfg.concurrency) as pool:
            all_cands = list(pool.map(run_pair, pairs))
    else:
        all_cands = [run_pair(p) for p in pairs]

    flat = [c for group in all_cands for c in group]
    write_jsonl(out, (c.to_dict() for c in flat))
    failed = [c for c in flat if c.status is CandidateStatus.GEN_FAILED]
    _write_manifest(
        out,
        "generate",
        cfg,
        [pairs_path],
        {"pairs": len(pairs), "candidates": len(flat), "failed": len(failed)},
        [{"candidate_id": c.candidate_id, "reason": c.note} for c in failed],
    )
    click.echo(f"generated {len(flat)} candidates ({len(failed)} failed) -> {out}")
    ctx.exit(1 if failed else 0)


@main.command()
@click.option("--candidates", "candidates_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--pairs", "pairs_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=str)
@click.pass_context
def rank(ctx, candidates_path, pairs_path, out):
    """Rank candidates per pair with the judge tournament."""
    cfg: PipelineConfig = ctx.obj
    pairs = {p.id: p for p in load_pairs(pairs_path)}
    clients = cfg.make_clients()
    templates = cfg.templates()
    dims = cfg.judge_dimensions()

    grouped: dict[str, list[Candidate]] = {}
    for raw in read_jsonl(candidates_path):
        cand = Candidate.from_dict(raw)
        if cand.status is CandidateStatus.OK and cand.text:
            grouped.setdefault(cand.pair_id, []).append(cand)

    rows = []
    skips = []
    for pair_id in sorted(grouped):
        pair = pairs.get(pair_id)
        entries = grouped[pair_id]
        if pair is None:
            skips.append({"pair_id": pair_id, "reason": "unknown pair_id"})
            continue
        if len(entries) < 2:
            skips.append({"pair_id": pair_id, "reason": "fewer than two candidates"})
            continue
        result = run_tournament(
            [(c.candidate_id, c.text) for c in entries],
            pair.context,
            dims,
            cfg.tournament,
            clients.judge,
            templates,
        )
        for rating in result.aggregate:
            row = {"pair_id": pair_id, "candidate_id": rating.candidate_id}
            for dim in dims:
                row[f"rating_{dim.value.lower()}"] = result.by_dimension[dim][rating.candidate_id].rating
            row["rating_mean"] = rating.rating
            row["games"] = rating.games
            rows.append(row)
    write_jsonl(out, rows)
    _write_manifest(out, "rank", cfg, [candidates_path, pairs_path], {"rated": len(rows)}, skips)
    click.echo(f"ranked {len(rows)} candidates -> {out}")
    ctx.exit(1 if skips else 0)


@main.command("build-prefs")
@click.option("--pairs", "pairs_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=str)
@click.option("--candidates-out", default=None, type=str, help="Also dump all candidates as JSONL.")
@click.pass_context
def build_prefs(ctx, pairs_path, out, candidates_out):
    """Run the full preference-pair pipeline over query-context pairs."""
    cfg: PipelineConfig = ctx.obj
    pairs = load_pairs(pairs_path)
    clients = cfg.make_clients()
    templates = cfg.templates()
    scorers = cfg.scorers()
    dims = cfg.judge_dimensions()

    def run_pair(pair: QueryContextPair):
        return build_sample(
            pair,
            clients,
            templates,
            score_cfg=cfg.score_cfg,
            criteria=cfg.criteria,
            scorers=scorers,
            fail_open=cfg.fail_open,
            tournament_cfg=cfg.tournament,
            dims=dims,
            t_max=cfg.t_max,
            temperature=cfg.generator.temperature,
        )

    if cfg.concurrency > 1:
        with ThreadPoolExecutor(max_workers=cfg.concurrency) as pool:
            outcomes = list(pool.map(run_pair, pairs))
    else:
        outcomes = [run_pair(p) for p in pairs]

    all_pairs = [p for o in outcomes for p in o.pairs]
    count = export_dataset(all_pairs, out)
    if candidates_out:
        write_jsonl(candidates_out, (c.to_dict() for o in outcomes for c in o.candidates))

    skips = [{"pair_id": o.pair_id, "reason": o.skipped_reason} for o in outcomes if o.skipped_reason]
    flags = [{"pair_id": o.pair_id, "flags": o.flags} for o in outcomes if o.flags]
    _write_manifest(
        out,
        "build-prefs",
        cfg,
        [pairs_path],
        {
            "pairs_in": len(pairs),
            "samples_emitted": sum(1 for o in outcomes if o.pairs),
            "samples_skipped": len(skips),
            "preference_pairs": count,
            "flagged_samples": len(flags),
        },
        skips + flags,
    )
    click.echo(f"built {count} preference pairs from {len(pairs)} samples -> {out}")
    ctx.exit(1 if skips else 0)


@main.command("capture")
@click.option("--pair", "trace_pairs", type=(str, str, str), multiple=True, required=True,
              help="CTX_TRACE PARA_TRACE CONTEXT_FILE triple; repeatable.")
@click.option("--out", required=True, type=str, help="Output prefix.")
@click.option("--k", "k_override", type=int, default=None)
@click.option("--plot/--no-plot", default=True, show_default=True)
@click.pass_context
def capture_cmd(ctx, trace_pairs, out, k_override, plot):
    """Attribute per-token knowledge use over with/without-context trace pairs."""
    cfg: PipelineConfig = ctx.obj
    k = k_override or cfg.capture_k

    results = []
    max_len = 0
    inputs = []
    try:
        for ctx_path, para_path, context_file in trace_pairs:
            inputs.extend([ctx_path, para_path, context_file])
            context = tokenize(Path(context_file).read_text(encoding="utf-8"))
            ctx_trace = read_trace(ctx_path)
            para_trace = read_trace(para_path)
            results.append(run_capture(ctx_trace, para_trace, context, k, min_common_len=cfg.min_common_len))
            max_len = max(max_len, len(ctx_trace.steps))
    except (CopyFaithError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        ctx.exit(2)

    events_path = f"{out}.events.jsonl"
    n_events = write_jsonl(events_path, (e for r in results for e in r.events()))

    profile = position_power_profile(results, max_len) if max_len else []
    profile_path = f"{out}.profile.csv"
    with open(profile_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["position", "ctx_power", "para_power", "n_ctx", "n_para"])
        writer.writerows(profile)
    if plot and profile:
        from .report import save_power_profile

        save_power_profile(profile, f"{out}.profile.png")

    _write_manifest(
        events_path,
        "capture",
        cfg,
        inputs,
        {"trace_pairs": len(results), "events": n_events, "positions": len(profile)},
        [],
    )
    click.echo(f"captured {n_events} events from {len(results)} trace pairs -> {events_path}")


def _load_eval_items(path: str) -> list[EvalItem]:
    items = []
    for row in read_jsonl(path):
        pair = QueryContextPair(id=str(row["id"]), query=row["query"], context=row["context"])
        options = row.get("options") or ()
        if isinstance(options, dict):
            options = tuple(sorted(options.items()))
        else:
            options = tuple((lab, text) for lab, text in options)
        items.append(
            EvalItem(
                pair=pair,
                options=options,
                gold_label=row.get("gold_label"),
                gold_answer_text=row.get("gold_answer_text"),
            )
        )
    return items


@main.command("eval")
@click.option("--items", "items_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--mode", type=click.Choice(["hit", "accuracy", "both"]), default="both", show_default=True)
@click.option("--out", required=True, type=str)
@click.option("--report", "report_path", default=None, type=str)
@click.pass_context
def eval_cmd(ctx, items_path, mode, out, report_path):
    """Hit-rate and accuracy evaluation over items."""
    cfg: PipelineConfig = ctx.obj
    items = _load_eval_items(items_path)
    clients = cfg.make_clients()
    templates = cfg.templates()

    outcomes = []
    for item in items:
        if mode in ("hit", "both") and item.gold_answer_text:
            outcomes.append(eval_hit(item, clients.generator, templates))
        if mode in ("accuracy", "both") and item.options and item.gold_label:
            outcomes.append(eval_accuracy(item, clients.generator, templates))

    write_jsonl(out, (o.to_dict() for o in outcomes))
    report = aggregate(outcomes) if outcomes else None
    if report and report_path:
        write_report_csv(report, report_path)
    counts = {"items": len(items), "outcomes": len(outcomes)}
    if report:
        counts.update(
            hit_rate=report.hit_rate, accuracy=report.accuracy, parse_failure_rate=report.parse_failure_rate
        )
    _write_manifest(out, "eval", cfg, [items_path], counts, [])
    click.echo(f"evaluated {len(outcomes)} outcomes -> {out}")


if __name__ == "__main__":
    main()
