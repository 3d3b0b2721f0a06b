"""JSONL helpers shared by the CLI and dataset export."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Iterator

from .promptgen import QueryContextPair


def read_jsonl(path: str | Path) -> Iterator[dict]:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield json.loads(line)


def write_jsonl(path: str | Path, rows: Iterable[dict]) -> int:
    count = 0
    path = Path(path)
    if path.parent != Path(""):
        path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
            count += 1
    return count


def load_pairs(path: str | Path) -> list[QueryContextPair]:
    """Query-context pairs from JSONL rows of {id, query, context, ...}.

    Ids must be unique within the file.
    """
    pairs = []
    seen: set[str] = set()
    for row in read_jsonl(path):
        pair_id = str(row["id"])
        if pair_id in seen:
            raise ValueError(f"duplicate pair id {pair_id!r} in {path}")
        seen.add(pair_id)
        pairs.append(
            QueryContextPair(
                id=pair_id,
                query=row["query"],
                context=row["context"],
                gold_answer=row.get("gold_answer"),
                wrong_answers=tuple(row.get("wrong_answers") or ()),
            )
        )
    return pairs
