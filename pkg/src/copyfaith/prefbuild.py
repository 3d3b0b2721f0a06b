"""Preference-pair dataset construction.

For each query-context pair: generate all six candidates, filter on
the multi-criteria bank, rank survivors in the judge tournament, stamp
answers when gold/wrong annotations exist, and emit one preference
pair per rejected survivor.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from enum import Enum
from pathlib import Path
from typing import Sequence

from .filterbank import FilterCriterion, MetricId, ScoreCard, ScorerSet, score_candidate
from .jsonio import read_jsonl, write_jsonl
from .judge import JudgeDimension, TournamentConfig, run_tournament
from .llmclient import LLMClient
from .metrics import CopyMetrics, CopyScoreConfig
from .promptgen import (
    ALL_METHODS,
    CandidateMethod,
    QueryContextPair,
    TemplateSet,
    generate_candidate,
)

CONCLUSION_TEMPLATE = "Therefore, the answer is: {answer}"


class CandidateStatus(Enum):
    OK = "ok"
    GEN_FAILED = "gen_failed"
    FILTERED_OUT = "filtered_out"


@dataclass
class Candidate:
    candidate_id: str
    pair_id: str
    method: CandidateMethod
    text: str
    metrics: CopyMetrics | None = None
    scorecard: ScoreCard | None = None
    elo: float | None = None
    status: CandidateStatus = CandidateStatus.OK
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "candidate_id": self.candidate_id,
            "pair_id": self.pair_id,
            "method": self.method.value,
            "text": self.text,
            "coverage": self.metrics.coverage if self.metrics else None,
            "density": self.metrics.density if self.metrics else None,
            "answer_len": self.metrics.answer_len if self.metrics else None,
            "elo": self.elo,
            "status": self.status.value,
            "note": self.note,
        }

    @classmethod
    def from_dict(cls, row: dict) -> "Candidate":
        metrics = None
        if row.get("coverage") is not None:
            metrics = CopyMetrics(
                coverage=row["coverage"],
                density=row["density"],
                answer_len=row.get("answer_len") or 0,
            )
        return cls(
            candidate_id=row["candidate_id"],
            pair_id=row["pair_id"],
            method=CandidateMethod.from_label(row["method"]),
            text=row.get("text", ""),
            metrics=metrics,
            elo=row.get("elo"),
            status=CandidateStatus(row.get("status", "ok")),
            note=row.get("note", ""),
        )


@dataclass(frozen=True)
class PreferencePair:
    prompt: str
    chosen: str
    rejected: str
    pair_id: str
    chosen_method: CandidateMethod
    rejected_method: CandidateMethod
    stamped: bool

    def __post_init__(self):
        if self.chosen == self.rejected:
            raise ValueError("chosen and rejected must differ")

    def to_dict(self) -> dict:
        return {
            "prompt": self.prompt,
            "chosen": self.chosen,
            "rejected": self.rejected,
            "pair_id": self.pair_id,
            "chosen_method": self.chosen_method.value,
            "rejected_method": self.rejected_method.value,
            "stamped": self.stamped,
        }


@dataclass(frozen=True)
class Clients:
    generator: LLMClient
    judge: LLMClient
    embedder: LLMClient


@dataclass
class SampleOutcome:
    pair_id: str
    pairs: list[PreferencePair] = dc_field(default_factory=list)
    candidates: list[Candidate] = dc_field(default_factory=list)
    skipped_reason: str | None = None
    flags: list[str] = dc_field(default_factory=list)


def stamp_answer(text: str, answer: str) -> str:
    """Append the conclusion sentence carrying ``answer`` verbatim.

    Unconditional: no deduplication even if the answer already closes
    the text. Empty text yields the conclusion sentence alone.
    """
    if not answer:
        raise ValueError("answer must be non-empty")
    conclusion = CONCLUSION_TEMPLATE.format(answer=answer)
    return f"{text}\n\n{conclusion}" if text else conclusion


def render_preference_prompt(pair: QueryContextPair, templates: TemplateSet) -> str:
    """Prompt rendering for the dataset: context block then query."""
    return templates.render("attributed", context=pair.context, query=pair.query)


def build_sample(
    pair: QueryContextPair,
    clients: Clients,
    templates: TemplateSet,
    *,
    score_cfg: CopyScoreConfig | None = None,
    criteria: Sequence[FilterCriterion] | None = None,
    scorers: ScorerSet | None = None,
    fail_open: Sequence[MetricId] = (),
    tournament_cfg: TournamentConfig | None = None,
    dims: Sequence[JudgeDimension] = (JudgeDimension.TWIST, JudgeDimension.CAUSAL),
    t_max: int = 3,
    temperature: float = 0.0,
) -> SampleOutcome:
    """Run one query-context pair through the full candidate pipeline.

    Fewer than two filter survivors skips the sample with a reason. If
    gold and wrong answers exist, the winner is stamped with the gold
    answer, surviving non-winner copy-strategy candidates are stamped
    with wrong answers (round-robin), and baselines go in unmodified;
    a non-copy-strategy winner is emitted unstamped and flagged.
    """
    score_cfg = score_cfg or CopyScoreConfig()
    scorers = scorers or ScorerSet()
    tournament_cfg = tournament_cfg or TournamentConfig()
    outcome = SampleOutcome(pair_id=pair.id)

    for method in ALL_METHODS:
        cand = generate_candidate(pair, method, clients.generator, templates, score_cfg, t_max, temperature)
        outcome.candidates.append(cand)

    generated = [c for c in outcome.candidates if c.status is CandidateStatus.OK]
    survivors: list[Candidate] = []
    for cand in generated:
        cand.scorecard = score_candidate(cand, pair, scorers, clients.embedder, criteria, fail_open)
        if cand.scorecard.passed:
            survivors.append(cand)
        else:
            cand.status = CandidateStatus.FILTERED_OUT

    if len(survivors) < 2:
        outcome.skipped_reason = "insufficient survivors"
        return outcome

    result = run_tournament(
        [(c.candidate_id, c.text) for c in survivors],
        pair.context,
        dims,
        tournament_cfg,
        clients.judge,
        templates,
    )
    for cand in survivors:
        cand.elo = result.aggregate_rating(cand.candidate_id)

    best = sorted(survivors, key=lambda c: (-c.elo, c.candidate_id))[0]
    others = [c for c in survivors if c.candidate_id != best.candidate_id]

    prompt = render_preference_prompt(pair, templates)
    stamping = bool(pair.gold_answer) and bool(pair.wrong_answers)
    emit: list[tuple[str, str, CandidateMethod, bool]] = []

    if stamping and best.method.is_cp:
        chosen_text = stamp_answer(best.text, pair.gold_answer)
        cp_rejected = [c for c in others if c.method.is_cp]
        for idx, cand in enumerate(cp_rejected):
            wrong = pair.wrong_answers[idx % len(pair.wrong_answers)]
            emit.append((chosen_text, stamp_answer(cand.text, wrong), cand.method, True))
        for cand in (c for c in others if not c.method.is_cp):
            emit.append((chosen_text, cand.text, cand.method, True))
    else:
        if stamping and not best.method.is_cp:
            outcome.flags.append("argmax-not-cp-unstamped")
        for cand in others:
            emit.append((best.text, cand.text, cand.method, False))

    for chosen_text, rejected_text, rejected_method, stamped in emit:
        if chosen_text == rejected_text:
            outcome.flags.append(f"identical-pair-dropped:{rejected_method.value}")
            continue
        outcome.pairs.append(
            PreferencePair(
                prompt=prompt,
                chosen=chosen_text,
                rejected=rejected_text,
                pair_id=pair.id,
                chosen_method=best.method,
                rejected_method=rejected_method,
                stamped=stamped,
            )
        )
    return outcome


def export_dataset(pairs: Sequence[PreferencePair], path: str | Path) -> int:
    """Write preference pairs as JSONL with provenance fields."""
    return write_jsonl(path, (p.to_dict() for p in pairs))


def read_dataset(path: str | Path) -> list[PreferencePair]:
    out = []
    for row in read_jsonl(path):
        out.append(
            PreferencePair(
                prompt=row["prompt"],
                chosen=row["chosen"],
                rejected=row["rejected"],
                pair_id=row["pair_id"],
                chosen_method=CandidateMethod.from_label(row["chosen_method"]),
                rejected_method=CandidateMethod.from_label(row["rejected_method"]),
                stamped=bool(row["stamped"]),
            )
        )
    return out
