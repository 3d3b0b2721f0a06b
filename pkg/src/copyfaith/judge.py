"""Pairwise LLM-as-judge comparisons and the Elo tournament over candidates.

Every pair is judged once per hallucination dimension, internally run
in both presentation orders to cancel position bias: agreement keeps
the verdict, disagreement scores a tie. Ratings update sequentially in
a fixed schedule so results are independent of call timing.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

from .errors import CopyFaithError
from .llmclient import LLMClient, user_request
from .promptgen import TemplateSet


class JudgeFormatError(CopyFaithError):
    """Neither presentation order produced a parseable verdict."""


class Verdict(Enum):
    A = "A"
    B = "B"
    TIE = "TIE"


class JudgeDimension(Enum):
    TWIST = "Twist"
    CAUSAL = "Causal"

    @property
    def instruction_template(self) -> str:
        return f"judge_instruction_{self.name.lower()}"


_VERDICT_JSON_RE = re.compile(r'"?verdict"?\s*:\s*"?\s*(A|B|TIE)\b', re.IGNORECASE)
_VERDICT_BARE_RE = re.compile(r"\b(A|B|TIE)\b")


def parse_verdict(reply: str) -> Verdict:
    """Verdict from the judge's formatted output.

    Primary grammar is the JSON-like verdict object; a bare uppercase
    A/B/TIE token is the fallback.
    """
    m = _VERDICT_JSON_RE.search(reply)
    if not m:
        m = _VERDICT_BARE_RE.search(reply)
    if not m:
        raise JudgeFormatError(f"no verdict in reply: {reply[:80]!r}")
    return Verdict[m.group(1).upper()]


@dataclass(frozen=True)
class ComparisonOutcome:
    verdict: Verdict
    flagged: bool = False
    reason: str = ""


def compare_pair(
    context: str,
    resp_a: str,
    resp_b: str,
    dim: JudgeDimension,
    client: LLMClient,
    templates: TemplateSet,
) -> ComparisonOutcome:
    """Judge two responses on one hallucination dimension.

    Runs both presentation orders; the verdict stands only when they
    agree about the same underlying response. Unparseable replies in
    both orders score TIE, flagged.
    """
    if not resp_a or not resp_b:
        raise ValueError("both responses must be non-empty")
    instruction = templates.load(dim.instruction_template).strip()

    def ask(first: str, second: str, first_is_a: bool) -> str | None:
        prompt = templates.render(
            "judge_pairwise",
            instruction=instruction,
            context=context,
            response_a=first,
            response_b=second,
        )
        reply = client.chat(user_request(client.chat_model_id, prompt))
        try:
            verdict = parse_verdict(reply.text)
        except JudgeFormatError:
            return None
        if verdict is Verdict.TIE:
            return "tie"
        # Map the slot verdict back to the underlying response.
        return "a" if (verdict is Verdict.A) == first_is_a else "b"

    w1 = ask(resp_a, resp_b, True)
    w2 = ask(resp_b, resp_a, False)
    if w1 is None and w2 is None:
        return ComparisonOutcome(Verdict.TIE, flagged=True, reason="unparseable")
    if w1 == w2 and w1 is not None:
        if w1 == "tie":
            return ComparisonOutcome(Verdict.TIE)
        return ComparisonOutcome(Verdict.A if w1 == "a" else Verdict.B)
    return ComparisonOutcome(Verdict.TIE, flagged=w1 is None or w2 is None, reason="disagreement")


def elo_update(r_a: float, r_b: float, outcome: Verdict, k: float) -> tuple[float, float]:
    """Standard Elo exchange; rating mass is conserved."""
    if k <= 0:
        raise ValueError("k must be > 0")
    e_a = 1.0 / (1.0 + 10.0 ** ((r_b - r_a) / 400.0))
    s_a = {Verdict.A: 1.0, Verdict.B: 0.0, Verdict.TIE: 0.5}[outcome]
    delta = k * (s_a - e_a)
    return r_a + delta, r_b - delta


@dataclass
class EloRating:
    candidate_id: str
    rating: float = 1500.0
    games: int = 0


@dataclass(frozen=True)
class TournamentConfig:
    k_factor: float = 32.0
    initial_rating: float = 1500.0
    passes: int = 1

    def __post_init__(self):
        if self.k_factor <= 0:
            raise ValueError("k_factor must be > 0")
        if self.passes < 1:
            raise ValueError("passes must be >= 1")


@dataclass(frozen=True)
class MatchRecord:
    dimension: JudgeDimension
    id_a: str
    id_b: str
    verdict: Verdict
    flagged: bool
    errored: bool = False


@dataclass
class TournamentResult:
    by_dimension: dict[JudgeDimension, dict[str, EloRating]]
    aggregate: list[EloRating]
    matches: list[MatchRecord] = field(default_factory=list)

    def aggregate_rating(self, candidate_id: str) -> float:
        for r in self.aggregate:
            if r.candidate_id == candidate_id:
                return r.rating
        raise KeyError(candidate_id)


def _entry(candidate) -> tuple[str, str]:
    if isinstance(candidate, tuple):
        return candidate
    return candidate.candidate_id, candidate.text


def run_tournament(
    candidates: Sequence,
    context: str,
    dims: Sequence[JudgeDimension],
    config: TournamentConfig,
    client: LLMClient,
    templates: TemplateSet,
) -> TournamentResult:
    """Single (or repeated) round-robin with per-dimension Elo ratings.

    The match order is fixed by sorted candidate id, so shuffling the
    input never changes the result. A failed judge call scores that
    match TIE; the tournament fails only if every match errored.
    """
    entries = sorted((_entry(c) for c in candidates), key=lambda e: e[0])
    if len(entries) < 2:
        raise ValueError("a tournament needs at least two candidates")
    texts = dict(entries)
    ids = [cid for cid, _ in entries]

    by_dim: dict[JudgeDimension, dict[str, EloRating]] = {
        dim: {cid: EloRating(cid, config.initial_rating) for cid in ids} for dim in dims
    }
    matches: list[MatchRecord] = []
    errored = 0
    total = 0

    for _ in range(config.passes):
        for dim in dims:
            ratings = by_dim[dim]
            for x in range(len(ids)):
                for y in range(x + 1, len(ids)):
                    id_a, id_b = ids[x], ids[y]
                    total += 1
                    try:
                        cmp = compare_pair(context, texts[id_a], texts[id_b], dim, client, templates)
                        record = MatchRecord(dim, id_a, id_b, cmp.verdict, cmp.flagged)
                    except CopyFaithError:
                        errored += 1
                        record = MatchRecord(dim, id_a, id_b, Verdict.TIE, flagged=True, errored=True)
                    matches.append(record)
                    ra, rb = elo_update(
                        ratings[id_a].rating, ratings[id_b].rating, record.verdict, config.k_factor
                    )
                    ratings[id_a].rating = ra
                    ratings[id_b].rating = rb
                    ratings[id_a].games += 1
                    ratings[id_b].games += 1

    if total > 0 and errored == total:
        raise JudgeFormatError("every tournament match errored")

    aggregate = [
        EloRating(
            candidate_id=cid,
            rating=sum(by_dim[dim][cid].rating for dim in dims) / len(dims),
            games=sum(by_dim[dim][cid].games for dim in dims),
        )
        for cid in ids
    ]
    return TournamentResult(by_dimension=by_dim, aggregate=aggregate, matches=matches)
