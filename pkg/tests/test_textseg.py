import pytest
from hypothesis import given, strategies as st

from copyfaith.textseg import TokenKind, normalize_surface, tokenize


def surfaces(text):
    return tokenize(text).surfaces


def kinds(text):
    return [t.kind for t in tokenize(text).tokens]


def test_empty_text():
    seq = tokenize("")
    assert seq.tokens == ()
    assert len(seq) == 0


def test_basic_sentence():
    assert surfaces("The cat sat.") == ["the", "cat", "sat", "."]
    assert kinds("The cat sat.") == [
        TokenKind.WORD,
        TokenKind.WORD,
        TokenKind.WORD,
        TokenKind.PUNCTUATION,
    ]


def test_decimal_number_kept_whole():
    assert surfaces("pH 7.4") == ["ph", "7.4"]
    assert kinds("pH 7.4") == [TokenKind.WORD, TokenKind.NUMBER]


def test_matchable_excludes_punctuation():
    seq = tokenize("Yes, it is.")
    assert seq.matchable_surfaces == ["yes", "it", "is"]
    assert len(seq) == 3
    assert len(seq.tokens) == 5


def test_spans_slice_back_to_surfaces():
    text = "Alpha BETA, gamma-7.5!"
    seq = tokenize(text)
    for tok in seq.tokens:
        start, end = tok.raw_span
        assert normalize_surface(text[start:end]) == tok.surface


@given(st.text(max_size=200))
def test_spans_ordered_nonoverlapping_and_lossless(text):
    seq = tokenize(text)
    prev_end = 0
    for tok in seq.tokens:
        start, end = tok.raw_span
        assert 0 <= start < end <= len(text)
        assert start >= prev_end
        # Skipped gaps are whitespace or joiner characters only.
        prev_end = end
        assert tok.surface
        assert normalize_surface(text[start:end]) == tok.surface


@given(st.text(max_size=200))
def test_lossless_reconstruction_from_spans(text):
    seq = tokenize(text)
    rebuilt = []
    cursor = 0
    for tok in seq.tokens:
        start, end = tok.raw_span
        rebuilt.append(text[cursor:start])  # skipped inter-token gap
        rebuilt.append(text[start:end])
        cursor = end
    rebuilt.append(text[cursor:])
    assert "".join(rebuilt) == text


@given(st.text(max_size=200))
def test_idempotent_on_normalized_text(text):
    first = tokenize(text).surfaces
    again = tokenize(" ".join(first)).surfaces
    assert again == first


@pytest.mark.parametrize(
    "text,expected",
    [
        ("a_b", ["a", "_", "b"]),
        ("don't", ["don", "'", "t"]),
        ("3.14 and 42", ["3.14", "and", "42"]),
        ("  spaced\tout\n", ["spaced", "out"]),
    ],
)
def test_segmentation_cases(text, expected):
    assert surfaces(text) == expected
