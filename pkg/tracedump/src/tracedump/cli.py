"""Command-line trace dumper: one with/without-context pair per query."""

from __future__ import annotations

import json
import sys

import click

from .dump import DumpError, DumpJob, dump, load_model


def read_jobs(path: str, model_id: str, **job_kwargs) -> list[DumpJob]:
    jobs = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            jobs.append(
                DumpJob(
                    query_id=str(row.get("query_id") or row["id"]),
                    query=row["query"],
                    context=row.get("context"),
                    model_id=model_id,
                    **job_kwargs,
                )
            )
    return jobs


@click.command()
@click.option("--model", "model_path", required=True, type=str)
@click.option("--queries", "queries_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", required=True, type=str)
@click.option("--k", type=int, default=5, show_default=True)
@click.option("--max-new-tokens", type=int, default=32, show_default=True)
@click.option("--decoding", type=click.Choice(["greedy", "sampled"]), default="greedy", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--layer", type=int, default=-1, show_default=True, help="Hidden-state layer index.")
def main(model_path, queries_path, out_dir, k, max_new_tokens, decoding, seed, layer):
    """Dump generation traces for each query in a JSONL file."""
    try:
        jobs = read_jobs(
            queries_path,
            model_path,
            k=k,
            max_new_tokens=max_new_tokens,
            decoding=decoding,
            seed=seed,
            layer=layer,
        )
        model, tokenizer = load_model(model_path)
    except (DumpError, OSError, KeyError, ValueError, json.JSONDecodeError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)

    failures = 0
    for job in jobs:
        try:
            paths = dump(job, out_dir, model=model, tokenizer=tokenizer)
        except DumpError as exc:
            failures += 1
            click.echo(f"job {job.query_id} failed: {exc}", err=True)
            continue
        click.echo(f"{job.query_id}: " + ", ".join(str(p) for p in paths.values()))
    if failures:
        click.echo(f"{failures}/{len(jobs)} jobs failed", err=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
