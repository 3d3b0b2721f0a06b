"""Two-run trace dumping for one query on a locally loaded model.

Trace format (consumed by the capture tooling):
  line 1: {"run_id", "query_id", "with_context", "model_id",
           "hidden_dim", "k", "generated_text"}
  line n: {"i", "topk": [[token, p], ...], "h_off"}
plus a float32 little-endian sidecar of hidden vectors, one per step,
at byte offset h_off * hidden_dim * 4.

Token surfaces are stored detokenized with a leading space on
word-initial tokens so the consumer can apply its own word-level
normalization; surfaces without one are subword continuations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch


class DumpError(Exception):
    """Model loading or decoding failed; partial outputs were removed."""


@dataclass(frozen=True)
class DumpJob:
    query_id: str
    query: str
    context: str | None = None
    model_id: str = ""
    k: int = 5
    max_new_tokens: int = 32
    decoding: str = "greedy"  # or "sampled"
    seed: int = 0
    layer: int = -1

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.max_new_tokens < 1:
            raise ValueError("max_new_tokens must be >= 1")
        if self.decoding not in ("greedy", "sampled"):
            raise ValueError("decoding must be 'greedy' or 'sampled'")


def load_model(model_path: str):
    from transformers import AutoModelForCausalLM, AutoTokenizer

    try:
        tokenizer = AutoTokenizer.from_pretrained(model_path)
        model = AutoModelForCausalLM.from_pretrained(model_path)
    except Exception as exc:
        raise DumpError(f"cannot load model from {model_path}: {exc}") from exc
    model.eval()
    return model, tokenizer


def make_surfacer(tokenizer):
    """Map a token id to its canonical detokenized surface.

    BPE space markers and sentencepiece underscores become a leading
    space; WordPiece continuations stay bare. Vocabularies with no
    marker convention (word-level) are treated as all word-initial.
    """
    vocab = tokenizer.get_vocab()
    has_markers = any(key.startswith(("Ġ", "▁", "##")) for key in vocab)

    def surface(token_id: int) -> str:
        piece = tokenizer.convert_ids_to_tokens([int(token_id)])[0]
        if piece is None:
            return ""
        if piece.startswith("##"):
            return piece[2:]
        text = tokenizer.convert_tokens_to_string([piece])
        if piece.startswith(("Ġ", "▁")) and not text.startswith(" "):
            text = " " + text
        if not has_markers and text and not text.startswith(" "):
            text = " " + text
        return text

    return surface


def _prompt(job: DumpJob, with_context: bool) -> str:
    if with_context and job.context:
        return (
            f"Context:\n{job.context}\n\nQuestion: {job.query}\n\n"
            "Based on the context, let's think step-by-step and answer the question in detail. Answer:"
        )
    return (
        f"Question: {job.query}\n\n"
        "Let's think step-by-step and answer the question in detail. Answer:"
    )


@torch.no_grad()
def _decode_run(model, tokenizer, job: DumpJob, with_context: bool):
    surface = make_surfacer(tokenizer)
    prompt = _prompt(job, with_context)
    input_ids = tokenizer(prompt, return_tensors="pt")["input_ids"]
    eos_id = tokenizer.eos_token_id
    k_eff = min(job.k, int(model.config.vocab_size))

    generator = None
    if job.decoding == "sampled":
        generator = torch.Generator()
        generator.manual_seed(job.seed)

    steps = []
    hiddens = []
    generated: list[int] = []
    for _ in range(job.max_new_tokens):
        out = model(input_ids, output_hidden_states=True, use_cache=False)
        logits = out.logits[0, -1].float()
        probs = torch.softmax(logits, dim=-1)
        top = torch.topk(probs, k_eff)
        topk = [[surface(tid), float(p)] for p, tid in zip(top.values, top.indices)]
        hidden = out.hidden_states[job.layer][0, -1].float().cpu().numpy().astype("<f4")
        steps.append(topk)
        hiddens.append(hidden)

        if job.decoding == "greedy":
            next_id = int(torch.argmax(probs))
        else:
            next_id = int(torch.multinomial(probs, 1, generator=generator))
        if eos_id is not None and next_id == eos_id:
            break
        generated.append(next_id)
        input_ids = torch.cat([input_ids, torch.tensor([[next_id]])], dim=1)

    text = tokenizer.decode(generated, skip_special_tokens=True) if generated else ""
    hidden_dim = int(hiddens[0].shape[0]) if hiddens else int(model.config.hidden_size)
    return steps, hiddens, text, k_eff, hidden_dim


def _write_run(path: Path, header: dict, steps, hiddens) -> None:
    sidecar = path.with_suffix(".f32")
    with open(path, "w", encoding="utf-8") as fh, open(sidecar, "wb") as side:
        fh.write(json.dumps(header, ensure_ascii=False) + "\n")
        for i, topk in enumerate(steps):
            fh.write(json.dumps({"i": i, "topk": topk, "h_off": i}, ensure_ascii=False) + "\n")
            side.write(np.asarray(hiddens[i], dtype="<f4").tobytes())


def dump(job: DumpJob, out_dir: str | Path, model=None, tokenizer=None) -> dict[str, Path]:
    """Run both decodes for one job and write the trace files.

    Returns {"ctx": path, "para": path}; the with-context run is
    skipped only if the job has no context (the parametric trace is
    always written). Partial files are deleted on failure.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if model is None or tokenizer is None:
        model, tokenizer = load_model(job.model_id)

    written: list[Path] = []
    paths: dict[str, Path] = {}
    runs = [("para", False)]
    if job.context:
        runs.insert(0, ("ctx", True))
    try:
        for tag, with_context in runs:
            steps, hiddens, text, k_eff, hidden_dim = _decode_run(model, tokenizer, job, with_context)
            path = out_dir / f"{job.query_id}.{tag}.jsonl"
            header = {
                "run_id": f"{job.query_id}-{tag}",
                "query_id": job.query_id,
                "with_context": with_context,
                "model_id": job.model_id or getattr(model.config, "name_or_path", ""),
                "hidden_dim": hidden_dim,
                "k": k_eff,
                "generated_text": text,
            }
            _write_run(path, header, steps, hiddens)
            written.extend([path, path.with_suffix(".f32")])
            paths[tag] = path
    except Exception as exc:
        for leftover in written:
            leftover.unlink(missing_ok=True)
        if isinstance(exc, DumpError):
            raise
        raise DumpError(f"decode failed for {job.query_id}: {exc}") from exc
    return paths
