"""Word-level tokenization shared by all copy math.

Splits raw text into case-folded word, number, and punctuation tokens,
each carrying a span back into the source text. Copy metrics run over
the word/number tokens only; punctuation is emitted but excluded from
sequence length and fragment membership.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum


class TokenKind(Enum):
    WORD = "word"
    NUMBER = "number"
    PUNCTUATION = "punctuation"


# Decimal numbers stay single tokens; letter runs are words; anything else
# that is not whitespace is punctuation, one codepoint at a time. Words may
# carry combining diacriticals: case folding decomposes some letters into
# letter + mark, and re-tokenizing a folded surface must not split it.
_MARKS = "̀-ͯ"
_TOKEN_RE = re.compile(
    rf"(?P<number>\d+(?:\.\d+)*)"
    rf"|(?P<word>(?:[^\W\d_][{_MARKS}]*)+)"
    rf"|(?P<punct>[^\w\s]|_)",
    re.UNICODE,
)


@dataclass(frozen=True)
class Token:
    surface: str
    raw_span: tuple[int, int]
    kind: TokenKind

    @property
    def matchable(self) -> bool:
        """Whether this token counts toward copy math (word or number)."""
        return self.kind is not TokenKind.PUNCTUATION


@dataclass(frozen=True)
class TokenSeq:
    """Ordered tokens plus the text they came from.

    ``matchable_surfaces`` is the sequence fragment detection and the
    length term in the copy metrics operate on.
    """

    tokens: tuple[Token, ...]
    source_text: str
    _matchable: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        idx = tuple(i for i, t in enumerate(self.tokens) if t.matchable)
        object.__setattr__(self, "_matchable", idx)

    def __len__(self) -> int:
        """Matchable-token count (words and numbers only)."""
        return len(self._matchable)

    @property
    def surfaces(self) -> list[str]:
        return [t.surface for t in self.tokens]

    @property
    def matchable_tokens(self) -> list[Token]:
        return [self.tokens[i] for i in self._matchable]

    @property
    def matchable_surfaces(self) -> list[str]:
        return [self.tokens[i].surface for i in self._matchable]

    @property
    def matchable_surface_set(self) -> frozenset[str]:
        return frozenset(self.matchable_surfaces)


def normalize_surface(raw: str) -> str:
    """Normalization applied to every token surface (case fold only)."""
    return raw.casefold()


def tokenize(text: str) -> TokenSeq:
    """Split ``text`` into normalized tokens with source spans.

    Deterministic and lossless: spans are non-overlapping, ordered, and
    slice back to the exact raw form each surface was folded from.
    Empty input yields an empty sequence.
    """
    tokens: list[Token] = []
    for m in _TOKEN_RE.finditer(text):
        if m.lastgroup == "number":
            kind = TokenKind.NUMBER
        elif m.lastgroup == "word":
            kind = TokenKind.WORD
        else:
            kind = TokenKind.PUNCTUATION
        tokens.append(
            Token(
                surface=normalize_surface(m.group()),
                raw_span=(m.start(), m.end()),
                kind=kind,
            )
        )
    return TokenSeq(tokens=tuple(tokens), source_text=text)
