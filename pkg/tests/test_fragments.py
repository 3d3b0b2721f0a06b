import random

from hypothesis import given, strategies as st

from copyfaith.fragments import detect_fragments, fragment_raw_spans
from copyfaith.textseg import tokenize


def brute_force_fragments(context, answer):
    """Independent oracle: at each answer position enumerate every context
    start, extend each match as far as it goes, and keep the maximum
    length (smallest context start on ties). Greedy advance past the
    emitted fragment, or by one token on no match.
    """
    n, m = len(answer), len(context)
    frags = []
    i = 0
    while i < n:
        best_len, best_start = 0, -1
        for j in range(m):
            length = 0
            while i + length < n and j + length < m and answer[i + length] == context[j + length]:
                length += 1
            if length > best_len:
                best_len, best_start = length, j
        if best_len > 0:
            frags.append((i, best_start, best_len))
            i += best_len
        else:
            i += 1
    return frags


def as_tuples(fragset):
    return [(f.answer_start, f.context_start, f.length) for f in fragset.fragments]


def detect(context_words, answer_words):
    return detect_fragments(tokenize(" ".join(context_words)), tokenize(" ".join(answer_words)))


def test_identity_single_fragment():
    fs = detect(["the", "cat", "sat"], ["the", "cat", "sat"])
    assert as_tuples(fs) == [(0, 0, 3)]
    assert fs.answer_len == 3


def test_disjoint_vocabularies():
    fs = detect(["a", "b", "c"], ["x", "y"])
    assert fs.fragments == ()
    assert fs.answer_len == 2


def test_greedy_hand_trace():
    fs = detect(
        ["the", "cat", "sat", "on", "the", "mat"],
        ["the", "cat", "on", "the", "mat"],
    )
    assert as_tuples(fs) == [(0, 0, 2), (2, 3, 3)]


def test_empty_inputs():
    assert detect([], ["a"]).fragments == ()
    assert detect(["a"], []).fragments == ()
    assert detect(["a"], []).answer_len == 0


def test_tie_break_smallest_context_start():
    # "a b" occurs at context starts 0 and 3; both give length 2.
    fs = detect(["a", "b", "x", "a", "b"], ["a", "b"])
    assert as_tuples(fs) == [(0, 0, 2)]


def test_punctuation_never_in_fragments():
    context = tokenize("the cat. sat on the mat.")
    answer = tokenize("the cat, sat!")
    fs = detect_fragments(context, answer)
    # Matchable views: C = [the cat sat on the mat], A = [the cat sat].
    assert as_tuples(fs) == [(0, 0, 3)]
    assert fs.answer_len == 3


def test_raw_span_serialization():
    context = tokenize("The cat sat on the mat.")
    answer = tokenize("the cat on the mat")
    fs = detect_fragments(context, answer)
    rows = [fragment_raw_spans(f, context, answer) for f in fs.fragments]
    assert rows[0]["surface"] == "the cat"
    assert rows[1]["surface"] == "on the mat"
    assert rows[0]["answer_span"] == [0, 7]


words4 = st.lists(st.sampled_from("abcd"), max_size=12)


@given(words4, words4)
def test_matches_brute_force_oracle(context, answer):
    fs = detect(context, answer)
    assert as_tuples(fs) == brute_force_fragments(context, answer)


@given(words4, words4)
def test_fragments_nonoverlapping_and_verbatim(context, answer):
    fs = detect(context, answer)
    covered = set()
    prev_end = -1
    for f in fs.fragments:
        assert f.length >= 1
        assert f.answer_start > prev_end
        prev_end = f.answer_start + f.length - 1
        span = set(range(f.answer_start, f.answer_start + f.length))
        assert not (span & covered)
        covered |= span
        assert (
            answer[f.answer_start : f.answer_start + f.length]
            == context[f.context_start : f.context_start + f.length]
        )
    assert sum(f.length for f in fs.fragments) <= fs.answer_len


@given(words4, words4, words4)
def test_appending_context_never_decreases_coverage(context, extra, answer):
    base = sum(f.length for f in detect(context, answer).fragments)
    extended = sum(f.length for f in detect(context + extra, answer).fragments)
    assert extended >= base


def test_oracle_equivalence_bulk_randomized():
    rng = random.Random(1234)
    for _ in range(1000):
        context = [rng.choice("abcd") for _ in range(rng.randint(0, 12))]
        answer = [rng.choice("abcd") for _ in range(rng.randint(0, 12))]
        assert as_tuples(detect(context, answer)) == brute_force_fragments(context, answer)
