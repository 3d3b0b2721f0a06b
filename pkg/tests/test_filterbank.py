import pytest

from copyfaith.filterbank import (
    Direction,
    FilterCriterion,
    MetricId,
    ScoreCard,
    ScorerSet,
    apply_filter,
    default_criteria,
    score_candidate,
)
from copyfaith.llmclient import LLMClient, MockBackend
from copyfaith.prefbuild import Candidate
from copyfaith.promptgen import CandidateMethod, QueryContextPair

PAIR = QueryContextPair(id="p1", query="what happened", context="The cat sat on the mat.")


def candidate(text, method=CandidateMethod.ATTRIBUTED):
    return Candidate(
        candidate_id=f"p1:{method.value}", pair_id="p1", method=method, text=text
    )


def passing_scorers():
    return ScorerSet(
        faith_doc=lambda p: 0.9,
        faith_sent=lambda p: 0.9,
        fluency_ppl=lambda p: 10.0,
    )


def embed_client():
    # Constant embedding: relevance cosine is 1.0 for any text pair.
    return LLMClient(MockBackend(), chat_model_id="gen")


def test_direction_invariants():
    with pytest.raises(ValueError):
        FilterCriterion(MetricId.FLUENCY_PPL, 30.0, Direction.AT_LEAST)
    with pytest.raises(ValueError):
        FilterCriterion(MetricId.COVERAGE, 0.5, Direction.AT_MOST)


def test_identity_copy_records_full_coverage():
    card = score_candidate(
        candidate("The cat sat on the mat."), PAIR, passing_scorers(), embed_client()
    )
    assert card.scores["coverage"] == 1.0
    assert card.passed
    assert not card.failed_criteria


def test_fluency_threshold_direction():
    scorers = passing_scorers()
    scorers.fluency_ppl = lambda p: 10.0
    card = score_candidate(candidate("The cat sat on the mat."), PAIR, scorers, embed_client())
    assert card.scores["fluency_ppl"] == 10.0
    assert "fluency_ppl" not in card.failed_criteria
    scorers.fluency_ppl = lambda p: 99.0
    card = score_candidate(candidate("The cat sat on the mat."), PAIR, scorers, embed_client())
    assert "fluency_ppl" in card.failed_criteria


def test_scorer_error_fail_closed_by_default():
    scorers = passing_scorers()

    def boom(payload):
        raise RuntimeError("scorer down")

    scorers.faith_doc = boom
    card = score_candidate(candidate("The cat sat on the mat."), PAIR, scorers, embed_client())
    assert not card.passed
    assert "faith_doc" in card.errors
    assert "faith_doc" in card.failed_criteria


def test_scorer_error_fail_open_when_configured():
    scorers = passing_scorers()

    def boom(payload):
        raise RuntimeError("scorer down")

    scorers.faith_doc = boom
    card = score_candidate(
        candidate("The cat sat on the mat."),
        PAIR,
        scorers,
        embed_client(),
        fail_open=[MetricId.FAITH_DOC],
    )
    assert card.passed
    assert "faith_doc" in card.errors


def test_sentence_aggregation_mean_vs_min():
    values = iter([1.0, 0.0])
    scorers = passing_scorers()
    scorers.faith_sent = lambda p: next(values)
    card = score_candidate(candidate("One. Two."), PAIR, scorers, embed_client())
    assert card.scores["faith_sent"] == pytest.approx(0.5)

    values = iter([1.0, 0.0])
    scorers = passing_scorers()
    scorers.faith_sent = lambda p: next(values)
    scorers.sent_aggregation = "min"
    card = score_candidate(candidate("One. Two."), PAIR, scorers, embed_client())
    assert card.scores["faith_sent"] == 0.0


def card_with(cid, **scores):
    base = {
        "faith_doc": 0.9,
        "faith_sent": 0.9,
        "coverage": 0.9,
        "density": 5.0,
        "relevance": 0.9,
        "fluency_ppl": 10.0,
    }
    base.update(scores)
    return ScoreCard(candidate_id=cid, scores=base)


def test_apply_filter_all_pass():
    cards = [card_with("a"), card_with("b")]
    assert apply_filter(cards, default_criteria()) == ["a", "b"]


def test_apply_filter_excludes_failures_preserving_order():
    cards = [card_with("a"), card_with("b", coverage=0.1), card_with("c")]
    assert apply_filter(cards, default_criteria()) == ["a", "c"]


def test_apply_filter_empty_survivors():
    cards = [card_with("a", coverage=0.0)]
    assert apply_filter(cards, default_criteria()) == []


def test_apply_filter_requires_criteria():
    with pytest.raises(ValueError):
        apply_filter([card_with("a")], [])


def test_relaxing_threshold_never_shrinks_survivors():
    cards = [card_with(f"c{i}", coverage=i / 10) for i in range(10)]
    strict = [FilterCriterion(MetricId.COVERAGE, 0.7, Direction.AT_LEAST)]
    relaxed = [FilterCriterion(MetricId.COVERAGE, 0.3, Direction.AT_LEAST)]
    assert set(apply_filter(cards, strict)) <= set(apply_filter(cards, relaxed))


def test_conjunction_equals_intersection():
    cards = [
        card_with("a"),
        card_with("b", coverage=0.1),
        card_with("c", fluency_ppl=99.0),
        card_with("d", coverage=0.1, fluency_ppl=99.0),
    ]
    both = [
        FilterCriterion(MetricId.COVERAGE, 0.5, Direction.AT_LEAST),
        FilterCriterion(MetricId.FLUENCY_PPL, 60.0, Direction.AT_MOST),
    ]
    survivors = set(apply_filter(cards, both))
    per_criterion = [set(apply_filter(cards, [c])) for c in both]
    assert survivors == per_criterion[0] & per_criterion[1]
