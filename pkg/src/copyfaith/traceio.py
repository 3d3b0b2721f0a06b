"""Generation-trace file format.

A trace is a JSONL file: one header line, then one line per decoding
step. Hidden-state vectors live in a float32 little-endian sidecar
file next to the trace; each step stores the index of its vector, and
byte offsets are index * hidden_dim * 4.

    header: {"run_id", "query_id", "with_context", "model_id",
             "hidden_dim", "k", "generated_text"}
    step:   {"i", "topk": [[token, p], ...], "h_off"}

Token surfaces are stored detokenized with a leading space on
word-initial tokens; an alphabetic surface without one is a subword
continuation piece.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CopyFaithError


class TraceFormatError(CopyFaithError):
    """Trace file violates the header/step schema."""


@dataclass(frozen=True)
class TraceStep:
    step_index: int
    topk: tuple[tuple[str, float], ...]
    hidden_ref: int

    def __post_init__(self):
        if not self.topk:
            raise TraceFormatError(f"step {self.step_index}: empty top-k list")
        probs = [p for _, p in self.topk]
        if any(p < 0 or p > 1 for p in probs):
            raise TraceFormatError(f"step {self.step_index}: probability out of [0, 1]")
        if any(probs[i] < probs[i + 1] for i in range(len(probs) - 1)):
            raise TraceFormatError(f"step {self.step_index}: top-k not descending")


@dataclass(frozen=True)
class GenerationTrace:
    run_id: str
    query_id: str
    with_context: bool
    model_id: str
    hidden_dim: int
    k: int
    generated_text: str
    steps: tuple[TraceStep, ...]
    path: Path | None = None

    @property
    def sidecar_path(self) -> Path | None:
        return self.path.with_suffix(".f32") if self.path else None

    def min_topk(self) -> int:
        return min((len(s.topk) for s in self.steps), default=0)


def sidecar_for(trace_path: str | Path) -> Path:
    return Path(trace_path).with_suffix(".f32")


def read_trace(path: str | Path) -> GenerationTrace:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        lines = [line for line in (l.strip() for l in fh) if line]
    if not lines:
        raise TraceFormatError(f"{path}: empty trace file")
    try:
        header = json.loads(lines[0])
        steps = []
        for line in lines[1:]:
            row = json.loads(line)
            step = TraceStep(
                step_index=int(row["i"]),
                topk=tuple((str(t), float(p)) for t, p in row["topk"]),
                hidden_ref=int(row["h_off"]),
            )
            if steps and step.step_index <= steps[-1].step_index:
                raise TraceFormatError(f"{path}: step indices not strictly increasing")
            steps.append(step)
        trace = GenerationTrace(
            run_id=str(header["run_id"]),
            query_id=str(header["query_id"]),
            with_context=bool(header["with_context"]),
            model_id=str(header.get("model_id", "")),
            hidden_dim=int(header["hidden_dim"]),
            k=int(header["k"]),
            generated_text=str(header.get("generated_text", "")),
            steps=tuple(steps),
            path=path,
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise TraceFormatError(f"{path}: malformed trace ({exc})") from exc
    return trace


def write_trace(
    path: str | Path,
    *,
    run_id: str,
    query_id: str,
    with_context: bool,
    model_id: str,
    hidden_dim: int,
    k: int,
    generated_text: str,
    steps: list[tuple[list[tuple[str, float]], np.ndarray | None]],
) -> GenerationTrace:
    """Write a trace plus its sidecar; ``steps`` pairs top-k lists with
    hidden vectors (``None`` writes a zero vector)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "run_id": run_id,
        "query_id": query_id,
        "with_context": with_context,
        "model_id": model_id,
        "hidden_dim": hidden_dim,
        "k": k,
        "generated_text": generated_text,
    }
    with open(path, "w", encoding="utf-8") as fh, open(sidecar_for(path), "wb") as side:
        fh.write(json.dumps(header, ensure_ascii=False) + "\n")
        for i, (topk, vector) in enumerate(steps):
            fh.write(
                json.dumps(
                    {"i": i, "topk": [[t, p] for t, p in topk], "h_off": i},
                    ensure_ascii=False,
                )
                + "\n"
            )
            if vector is None:
                vector = np.zeros(hidden_dim, dtype="<f4")
            side.write(np.asarray(vector, dtype="<f4").tobytes())
    return read_trace(path)


class TraceVectors:
    """On-demand access to the hidden vectors behind a trace."""

    def __init__(self, trace: GenerationTrace):
        if trace.sidecar_path is None or not trace.sidecar_path.exists():
            raise TraceFormatError(f"no sidecar file for trace {trace.run_id}")
        self._path = trace.sidecar_path
        self._dim = trace.hidden_dim

    def vector(self, hidden_ref: int) -> np.ndarray:
        return np.fromfile(
            self._path, dtype="<f4", count=self._dim, offset=hidden_ref * self._dim * 4
        )
