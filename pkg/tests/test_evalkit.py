import pytest
from hypothesis import given, strategies as st

from copyfaith.evalkit import (
    EvalItem,
    EvalOutcome,
    aggregate,
    contains_normalized,
    eval_accuracy,
    eval_hit,
    parse_option_letter,
    write_report_csv,
)
from copyfaith.llmclient import LLMClient, MockBackend
from copyfaith.promptgen import QueryContextPair, TemplateSet

TEMPLATES = TemplateSet()
PAIR = QueryContextPair(id="e1", query="Where is the louvre?", context="The Louvre is in Paris.")


def item(**kwargs):
    return EvalItem(pair=PAIR, **kwargs)


def client_saying(text):
    return LLMClient(MockBackend(text), chat_model_id="m")


def test_hit_verbatim():
    out = eval_hit(item(gold_answer_text="Paris"), client_saying("It is in Paris, France."), TEMPLATES)
    assert out.hit is True


def test_hit_missing():
    out = eval_hit(item(gold_answer_text="Paris"), client_saying("No idea."), TEMPLATES)
    assert out.hit is False


def test_hit_whitespace_and_case_normalized():
    out = eval_hit(
        item(gold_answer_text="New York"), client_saying("somewhere in new  york maybe"), TEMPLATES
    )
    assert out.hit is True


def test_hit_empty_response_flagged():
    out = eval_hit(item(gold_answer_text="Paris"), client_saying("   "), TEMPLATES)
    assert out.hit is False
    assert out.flagged


def test_hit_requires_gold():
    with pytest.raises(ValueError):
        eval_hit(item(), client_saying("x"), TEMPLATES)


OPTIONS = (("A", "Paris"), ("B", "Rome"), ("C", "Berlin"), ("D", "unknown"))


def test_accuracy_single_letter():
    out = eval_accuracy(item(options=OPTIONS, gold_label="B"), client_saying("B"), TEMPLATES)
    assert out.chosen_label == "B"
    assert out.correct is True


def test_accuracy_embedded_letter():
    out = eval_accuracy(
        item(options=OPTIONS, gold_label="C"), client_saying("The answer is C."), TEMPLATES
    )
    assert out.chosen_label == "C"
    assert out.correct is True


def test_accuracy_parse_failure():
    out = eval_accuracy(item(options=OPTIONS, gold_label="A"), client_saying("maybe"), TEMPLATES)
    assert out.parse_failed
    assert out.correct is False


def test_option_letter_rules():
    assert parse_option_letter("A") == "A"
    assert parse_option_letter("I'd say (B)") == "B"
    assert parse_option_letter("CAB") is None  # not standalone
    assert parse_option_letter("answer: D.") == "D"
    assert parse_option_letter("nothing") is None


def test_contains_normalized():
    assert contains_normalized("new  york city", "New York")
    assert not contains_normalized("newyork", "new york")


def test_aggregate_accuracy():
    outcomes = [EvalOutcome("i", "r", correct=c) for c in (True, True, True, False)]
    report = aggregate(outcomes)
    assert report.accuracy == 0.75
    assert report.hit_rate is None


def test_aggregate_empty_errors():
    with pytest.raises(ValueError):
        aggregate([])


def test_aggregate_mixed_modes_and_csv(tmp_path):
    outcomes = [
        EvalOutcome("a", "r", hit=True),
        EvalOutcome("b", "r", hit=False),
        EvalOutcome("c", "r", correct=True),
        EvalOutcome("d", "r", correct=False, parse_failed=True),
    ]
    report = aggregate(outcomes)
    assert report.hit_rate == 0.5
    assert report.accuracy == 0.5
    assert report.parse_failure_rate == 0.5
    path = tmp_path / "report.csv"
    write_report_csv(report, path)
    header, row = path.read_text().strip().splitlines()
    assert "hit_rate" in header and "accuracy" in header
    assert "0.500000" in row


def test_aggregate_permutation_invariant():
    outcomes = [
        EvalOutcome("a", "r", hit=True),
        EvalOutcome("b", "r", hit=False),
        EvalOutcome("c", "r", correct=True),
        EvalOutcome("d", "r", correct=False, parse_failed=True),
    ]
    assert aggregate(outcomes) == aggregate(list(reversed(outcomes)))


def test_parse_failures_never_correct():
    out = eval_accuracy(item(options=OPTIONS, gold_label="A"), client_saying("???"), TEMPLATES)
    assert out.parse_failed and out.correct is False


@given(st.text(max_size=200))
def test_option_parser_total(text):
    result = parse_option_letter(text)
    assert result in (None, "A", "B", "C", "D")
