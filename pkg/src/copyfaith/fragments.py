"""Copy fragment detection.

Greedy left-to-right extraction of the longest verbatim token runs an
answer shares with its context. Runs over matchable (word/number)
tokens only, so punctuation never starts, extends, or counts toward a
fragment.
"""

from __future__ import annotations

from dataclasses import dataclass

from .textseg import TokenSeq


@dataclass(frozen=True)
class CopyFragment:
    """One copied run: ``length`` tokens starting at ``answer_start`` in the
    answer and ``context_start`` in the context (matchable-token indices)."""

    answer_start: int
    context_start: int
    length: int


@dataclass(frozen=True)
class FragmentSet:
    fragments: tuple[CopyFragment, ...]
    answer_len: int

    @property
    def total_copied(self) -> int:
        return sum(f.length for f in self.fragments)


def detect_fragments(context: TokenSeq, answer: TokenSeq) -> FragmentSet:
    """Extract the copied-fragment set linking ``answer`` to ``context``.

    At each answer position, the longest match over all context start
    positions wins (ties broken by smallest context start); the cursor
    then jumps past the emitted fragment, or advances by one token when
    nothing matches. Deterministic; empty inputs yield an empty set.
    """
    a = answer.matchable_surfaces
    c = context.matchable_surfaces
    n, m = len(a), len(c)

    # Start positions per surface, in ascending order for the tie-break.
    starts: dict[str, list[int]] = {}
    for j, tok in enumerate(c):
        starts.setdefault(tok, []).append(j)

    found: list[CopyFragment] = []
    i = 0
    while i < n:
        best_len = 0
        best_start = -1
        for j in starts.get(a[i], ()):
            length = 0
            while i + length < n and j + length < m and a[i + length] == c[j + length]:
                length += 1
            if length > best_len:
                best_len = length
                best_start = j
        if best_len > 0:
            found.append(CopyFragment(answer_start=i, context_start=best_start, length=best_len))
            i += best_len
        else:
            i += 1
    return FragmentSet(fragments=tuple(found), answer_len=n)


def fragment_answer_surfaces(frag: CopyFragment, answer: TokenSeq) -> list[str]:
    """Normalized surfaces covered by ``frag`` in the answer."""
    toks = answer.matchable_surfaces
    return toks[frag.answer_start : frag.answer_start + frag.length]


def fragment_raw_spans(frag: CopyFragment, context: TokenSeq, answer: TokenSeq) -> dict:
    """Raw-text character spans for one fragment, for serialization.

    The answer span runs from the first to the last covered token, so it
    may include punctuation that sits between matchable tokens.
    """
    a_toks = answer.matchable_tokens
    c_toks = context.matchable_tokens
    a_first = a_toks[frag.answer_start]
    a_last = a_toks[frag.answer_start + frag.length - 1]
    c_first = c_toks[frag.context_start]
    c_last = c_toks[frag.context_start + frag.length - 1]
    a_span = (a_first.raw_span[0], a_last.raw_span[1])
    c_span = (c_first.raw_span[0], c_last.raw_span[1])
    return {
        "answer_start": frag.answer_start,
        "context_start": frag.context_start,
        "length": frag.length,
        "answer_span": list(a_span),
        "context_span": list(c_span),
        "surface": answer.source_text[a_span[0] : a_span[1]],
    }
