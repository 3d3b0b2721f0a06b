"""Multi-criteria candidate filtering over pluggable scorers.

Copy metrics are computed in-process; faithfulness and fluency come
from external scorer endpoints; query relevance is embedding cosine.
A candidate survives only if every configured criterion holds.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import httpx

from .errors import CopyFaithError
from .llmclient import LLMClient, cosine
from .promptgen import QueryContextPair, candidate_copy_metrics, split_sentences


class MetricId(Enum):
    FAITH_DOC = "faith_doc"
    FAITH_SENT = "faith_sent"
    COVERAGE = "coverage"
    DENSITY = "density"
    RELEVANCE = "relevance"
    FLUENCY_PPL = "fluency_ppl"


class Direction(Enum):
    AT_LEAST = "at_least"
    AT_MOST = "at_most"


@dataclass(frozen=True)
class FilterCriterion:
    metric_id: MetricId
    threshold: float
    direction: Direction

    def __post_init__(self):
        expected = Direction.AT_MOST if self.metric_id is MetricId.FLUENCY_PPL else Direction.AT_LEAST
        if self.direction is not expected:
            raise ValueError(f"{self.metric_id.value} must use direction {expected.value}")

    def satisfied_by(self, score: float) -> bool:
        if self.direction is Direction.AT_LEAST:
            return score >= self.threshold
        return score <= self.threshold


def default_criteria() -> list[FilterCriterion]:
    return [
        FilterCriterion(MetricId.FAITH_DOC, 0.6, Direction.AT_LEAST),
        FilterCriterion(MetricId.FAITH_SENT, 0.6, Direction.AT_LEAST),
        FilterCriterion(MetricId.COVERAGE, 0.5, Direction.AT_LEAST),
        FilterCriterion(MetricId.DENSITY, 2.0, Direction.AT_LEAST),
        FilterCriterion(MetricId.RELEVANCE, 0.5, Direction.AT_LEAST),
        FilterCriterion(MetricId.FLUENCY_PPL, 60.0, Direction.AT_MOST),
    ]


@dataclass
class ScoreCard:
    candidate_id: str
    scores: dict[str, float] = field(default_factory=dict)
    errors: dict[str, str] = field(default_factory=dict)
    passed: bool = False
    failed_criteria: list[str] = field(default_factory=list)


Scorer = Callable[[dict], float]


class HttpScorer:
    """Remote one-score-per-call endpoint: POST payload, read {"score": x}."""

    def __init__(self, url: str, timeout: float = 60.0, transport: httpx.BaseTransport | None = None):
        self.url = url
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def __call__(self, payload: dict) -> float:
        resp = self._client.post(self.url, json=payload)
        resp.raise_for_status()
        return float(resp.json()["score"])


@dataclass
class ScorerSet:
    faith_doc: Scorer | None = None
    faith_sent: Scorer | None = None
    fluency_ppl: Scorer | None = None
    sent_aggregation: str = "mean"  # or "min"


def _aggregate(values: Sequence[float], how: str) -> float:
    if how == "min":
        return min(values)
    return sum(values) / len(values)


def score_candidate(
    cand,
    pair: QueryContextPair,
    scorers: ScorerSet,
    client: LLMClient,
    criteria: Sequence[FilterCriterion] | None = None,
    fail_open: Sequence[MetricId] = (),
) -> ScoreCard:
    """Assemble all six metric scores for one candidate and evaluate.

    A scorer failure marks its metric errored; errored metrics reject
    the candidate unless listed fail-open.
    """
    criteria = list(criteria) if criteria is not None else default_criteria()
    card = ScoreCard(candidate_id=cand.candidate_id)

    m = cand.metrics or candidate_copy_metrics(pair, cand.method, cand.text)
    card.scores[MetricId.COVERAGE.value] = m.coverage
    card.scores[MetricId.DENSITY.value] = m.density

    try:
        card.scores[MetricId.RELEVANCE.value] = cosine(client.embed(pair.query), client.embed(cand.text))
    except (CopyFaithError, httpx.HTTPError, ValueError) as exc:
        card.errors[MetricId.RELEVANCE.value] = str(exc)

    def run_scorer(metric: MetricId, scorer: Scorer | None, payload_fn):
        if scorer is None:
            card.errors[metric.value] = "no scorer configured"
            return
        try:
            card.scores[metric.value] = payload_fn(scorer)
        except Exception as exc:  # scorer endpoints may fail arbitrarily
            card.errors[metric.value] = str(exc)

    run_scorer(
        MetricId.FAITH_DOC,
        scorers.faith_doc,
        lambda s: float(s({"context": pair.context, "claim": cand.text})),
    )

    def sent_level(scorer: Scorer) -> float:
        sentences = split_sentences(cand.text) or [cand.text]
        values = [float(scorer({"context": pair.context, "claim": sent})) for sent in sentences]
        return _aggregate(values, scorers.sent_aggregation)

    run_scorer(MetricId.FAITH_SENT, scorers.faith_sent, sent_level)
    run_scorer(MetricId.FLUENCY_PPL, scorers.fluency_ppl, lambda s: float(s({"text": cand.text})))

    card.failed_criteria = evaluate_card(card, criteria, fail_open)
    card.passed = not card.failed_criteria
    return card


def evaluate_card(
    card: ScoreCard,
    criteria: Sequence[FilterCriterion],
    fail_open: Sequence[MetricId] = (),
) -> list[str]:
    """Names of criteria the card fails (empty means it survives)."""
    fail_open_names = {m.value for m in fail_open}
    failed = []
    for crit in criteria:
        name = crit.metric_id.value
        if name in card.scores:
            if not crit.satisfied_by(card.scores[name]):
                failed.append(name)
        elif name in card.errors:
            if name not in fail_open_names:
                failed.append(name)
        else:
            failed.append(name)
    return failed


def apply_filter(
    cards: Sequence[ScoreCard],
    criteria: Sequence[FilterCriterion],
    fail_open: Sequence[MetricId] = (),
) -> list[str]:
    """Ids of cards satisfying every criterion, input order preserved."""
    if not criteria:
        raise ValueError("criteria must be non-empty")
    return [c.candidate_id for c in cards if not evaluate_card(c, criteria, fail_open)]
