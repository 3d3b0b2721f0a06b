"""Hit-rate and accuracy evaluation over model responses.

Hit rate asks a chain-of-thought question and checks whether the gold
answer string appears in the response; accuracy asks for a single
option letter and compares it to the gold label.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .llmclient import LLMClient, user_request
from .promptgen import QueryContextPair, TemplateSet, normalize_ws

OPTION_LABELS = ("A", "B", "C", "D")


@dataclass(frozen=True)
class EvalItem:
    pair: QueryContextPair
    options: tuple[tuple[str, str], ...] = ()
    gold_label: str | None = None
    gold_answer_text: str | None = None

    def __post_init__(self):
        if self.gold_label is not None and self.gold_label not in OPTION_LABELS:
            raise ValueError(f"gold_label must be one of {OPTION_LABELS}")
        if self.options:
            labels = [lab for lab, _ in self.options]
            if len(set(labels)) != len(labels) or not set(labels) <= set(OPTION_LABELS):
                raise ValueError("option labels must be unique A-D letters")


@dataclass
class EvalOutcome:
    item_id: str
    raw_response: str
    hit: bool | None = None
    chosen_label: str | None = None
    correct: bool | None = None
    parse_failed: bool = False
    flagged: bool = False

    def to_dict(self) -> dict:
        return {
            "item_id": self.item_id,
            "raw_response": self.raw_response,
            "hit": self.hit,
            "chosen_label": self.chosen_label,
            "correct": self.correct,
            "parse_failed": self.parse_failed,
            "flagged": self.flagged,
        }


def contains_normalized(haystack: str, needle: str) -> bool:
    """Case-insensitive, whitespace-normalized containment."""
    return normalize_ws(needle).casefold() in normalize_ws(haystack).casefold()


_LETTER_RE = re.compile(r"(?<![A-Za-z0-9])([A-D])(?![A-Za-z0-9])")


def parse_option_letter(text: str) -> str | None:
    """First standalone A-D letter, or None when there is none."""
    m = _LETTER_RE.search(text)
    return m.group(1) if m else None


def render_options(options: Sequence[tuple[str, str]]) -> str:
    return "\n".join(f"{label}. {text}" for label, text in options)


def eval_hit(item: EvalItem, client: LLMClient, templates: TemplateSet) -> EvalOutcome:
    """Chain-of-thought answer, scored by gold-string containment."""
    if not item.gold_answer_text:
        raise ValueError("hit-rate evaluation needs gold_answer_text")
    prompt = templates.render("eval_hit", context=item.pair.context, question=item.pair.query)
    reply = client.chat(user_request(client.chat_model_id, prompt)).text
    if not reply.strip():
        return EvalOutcome(item_id=item.pair.id, raw_response=reply, hit=False, flagged=True)
    return EvalOutcome(
        item_id=item.pair.id,
        raw_response=reply,
        hit=contains_normalized(reply, item.gold_answer_text),
    )


def eval_accuracy(item: EvalItem, client: LLMClient, templates: TemplateSet) -> EvalOutcome:
    """Direct option-letter answer, compared to the gold label."""
    if not item.options or item.gold_label is None:
        raise ValueError("accuracy evaluation needs options and gold_label")
    prompt = templates.render(
        "eval_accuracy",
        context=item.pair.context,
        question=item.pair.query,
        options=render_options(item.options),
    )
    reply = client.chat(user_request(client.chat_model_id, prompt)).text
    chosen = parse_option_letter(reply)
    if chosen is None:
        return EvalOutcome(
            item_id=item.pair.id, raw_response=reply, correct=False, parse_failed=True
        )
    return EvalOutcome(
        item_id=item.pair.id,
        raw_response=reply,
        chosen_label=chosen,
        correct=chosen == item.gold_label,
    )


@dataclass(frozen=True)
class EvalReport:
    n_items: int
    n_hit_mode: int
    hit_rate: float | None
    n_accuracy_mode: int
    accuracy: float | None
    parse_failure_rate: float | None

    def to_row(self) -> dict:
        return {
            "n_items": self.n_items,
            "n_hit_mode": self.n_hit_mode,
            "hit_rate": "" if self.hit_rate is None else f"{self.hit_rate:.6f}",
            "n_accuracy_mode": self.n_accuracy_mode,
            "accuracy": "" if self.accuracy is None else f"{self.accuracy:.6f}",
            "parse_failure_rate": (
                "" if self.parse_failure_rate is None else f"{self.parse_failure_rate:.6f}"
            ),
        }


def aggregate(outcomes: Sequence[EvalOutcome]) -> EvalReport:
    """Summary rates, each over its own mode's denominator."""
    if not outcomes:
        raise ValueError("no outcomes to aggregate")
    hit_items = [o for o in outcomes if o.hit is not None]
    acc_items = [o for o in outcomes if o.correct is not None]
    return EvalReport(
        n_items=len(outcomes),
        n_hit_mode=len(hit_items),
        hit_rate=(sum(o.hit for o in hit_items) / len(hit_items)) if hit_items else None,
        n_accuracy_mode=len(acc_items),
        accuracy=(sum(o.correct for o in acc_items) / len(acc_items)) if acc_items else None,
        parse_failure_rate=(
            (sum(o.parse_failed for o in acc_items) / len(acc_items)) if acc_items else None
        ),
    )


def write_report_csv(report: EvalReport, path: str | Path) -> None:
    row = report.to_row()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(row))
        writer.writeheader()
        writer.writerow(row)
