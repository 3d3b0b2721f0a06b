"""Prompt construction, generation strategies, and output parsing.

Holds the prompt templates as data, drives the three high-copying
strategies (sentence ordering, transition linking, writer-reviewer
refinement) plus the three abstractive baselines, and parses each
strategy's structured output with repair rules instead of retries.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Sequence

from .errors import CopyFaithError
from .fragments import detect_fragments
from .llmclient import LLMClient, user_request
from .metrics import CopyMetrics, CopyScoreConfig, copy_metrics, copy_score
from .textseg import tokenize


class OutputFormatError(CopyFaithError):
    """Model reply does not contain the structure the parser demands."""


class ExtractionFailedError(CopyFaithError):
    """No extracted sentence survived verbatim verification."""


class CandidateMethod(Enum):
    BASE = "Base"
    ATTRIBUTED = "Attributed"
    CITATIONS = "Citations"
    CP_ORDER = "CP-Order"
    CP_LINK = "CP-Link"
    CP_REFINE = "CP-Refine"

    @property
    def is_cp(self) -> bool:
        return self in (CandidateMethod.CP_ORDER, CandidateMethod.CP_LINK, CandidateMethod.CP_REFINE)

    @classmethod
    def from_label(cls, label: str) -> "CandidateMethod":
        for m in cls:
            if m.value == label:
                return m
        raise ValueError(f"unknown method label {label!r}")


ALL_METHODS = tuple(CandidateMethod)


@dataclass(frozen=True)
class QueryContextPair:
    id: str
    query: str
    context: str
    gold_answer: str | None = None
    wrong_answers: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.query or not self.context:
            raise ValueError("query and context must be non-empty")


@dataclass(frozen=True)
class ExtractedSentence:
    sent_id: str
    text: str
    verified_in_context: bool


@dataclass(frozen=True)
class ExtractionResult:
    sentences: tuple[ExtractedSentence, ...]
    dropped: int


@dataclass(frozen=True)
class RefineState:
    iteration: int
    answer: str
    feedback: str | None = None
    score: float | None = None


@dataclass(frozen=True)
class RefineOutcome:
    text: str
    history: tuple[RefineState, ...]
    met_threshold: bool


@dataclass(frozen=True)
class LinkResult:
    text: str
    used_fallback: bool


class TemplateSet:
    """Prompt templates loaded from a directory of plain-text files.

    Substitution replaces only the placeholders passed to render, so
    literal braces elsewhere in a template survive untouched.
    """

    def __init__(self, directory: str | Path | None = None):
        if directory is None:
            self._dir = Path(str(resources.files("copyfaith").joinpath("templates")))
        else:
            self._dir = Path(directory)
        if not self._dir.is_dir():
            raise FileNotFoundError(f"template directory not found: {self._dir}")
        self._cache: dict[str, str] = {}

    def load(self, name: str) -> str:
        if name not in self._cache:
            path = self._dir / f"{name}.txt"
            self._cache[name] = path.read_text(encoding="utf-8")
        return self._cache[name]

    def render(self, name: str, **fields: str) -> str:
        text = self.load(name)
        for key, value in fields.items():
            text = text.replace("{" + key + "}", str(value))
        return text


_WS_RE = re.compile(r"\s+")


def normalize_ws(text: str) -> str:
    return _WS_RE.sub(" ", text).strip()


_SENT_SPLIT_RE = re.compile(r"(?<=[.!?])\s+|\n+")


def split_sentences(text: str) -> list[str]:
    """Lightweight sentence split on terminal punctuation and newlines."""
    return [s.strip() for s in _SENT_SPLIT_RE.split(text) if s and s.strip()]


def number_sentences(sentences: Sequence[str], style: str = "sent") -> str:
    if style == "sent":
        return "\n".join(f"SENT_{i + 1}: {s}" for i, s in enumerate(sentences))
    return "\n".join(f"[{i + 1}] {s}" for i, s in enumerate(sentences))


# --- parsers -----------------------------------------------------------

def parse_extracted(reply: str) -> list[str]:
    """Sentences from lines prefixed "EXTRACTED: "; other lines ignored."""
    out = []
    for line in reply.splitlines():
        stripped = line.strip()
        if stripped.startswith("EXTRACTED:"):
            sent = stripped[len("EXTRACTED:") :].strip()
            if sent:
                out.append(sent)
    return out


_ORDER_RE = re.compile(r"ORDER\s*:\s*(.*)")


def parse_order(reply: str, ids: Sequence[str]) -> list[str]:
    """Sentence-id permutation from an "ORDER:" line, repaired.

    Unknown ids are dropped, duplicates keep their first position, and
    missing ids are appended in original order, so the result is always
    a permutation of ``ids``. Raises OutputFormatError when no ORDER
    line exists at all.
    """
    match = None
    for line in reply.splitlines():
        match = _ORDER_RE.search(line)
        if match:
            break
    if not match:
        raise OutputFormatError("no ORDER line in reply")
    listed = match.group(1).strip().strip("[]")
    known = set(ids)
    seen: list[str] = []
    for raw in listed.split(","):
        sid = raw.strip()
        if sid in known and sid not in seen:
            seen.append(sid)
    seen.extend(sid for sid in ids if sid not in seen)
    return seen


_INTRO_RE = re.compile(r"\[INTRO\](.*?)\[/INTRO\]", re.DOTALL)
_CONCLUSION_RE = re.compile(r"\[CONCLUSION\](.*?)\[/CONCLUSION\]", re.DOTALL)
_TRANSITION_RE = re.compile(r"\[TRANSITION_(\d+)_(\d+)\](.*?)\[/TRANSITION_\1_\2\]", re.DOTALL)


@dataclass(frozen=True)
class LinkParts:
    intro: str | None
    conclusion: str | None
    transitions: dict[tuple[int, int], str]
    found_any: bool


def parse_link(reply: str) -> LinkParts:
    """Optional [INTRO], [CONCLUSION], and [TRANSITION_i_j] blocks."""
    intro_m = _INTRO_RE.search(reply)
    concl_m = _CONCLUSION_RE.search(reply)
    transitions = {
        (int(m.group(1)), int(m.group(2))): m.group(3).strip()
        for m in _TRANSITION_RE.finditer(reply)
    }
    intro = intro_m.group(1).strip() if intro_m else None
    conclusion = concl_m.group(1).strip() if concl_m else None
    found = bool(transitions) or intro is not None or conclusion is not None
    return LinkParts(intro=intro, conclusion=conclusion, transitions=transitions, found_any=found)


def truncate_words(text: str, limit: int = 15) -> str:
    words = text.split()
    if len(words) <= limit:
        return text
    return " ".join(words[:limit])


_CITATION_RE = re.compile(r"\[\d+(?:\s*,\s*\d+)*\]")


def strip_citation_markers(text: str) -> str:
    """Remove bracketed citation markers before copy-metric computation."""
    return normalize_ws(_CITATION_RE.sub(" ", text))


# --- strategies --------------------------------------------------------

def candidate_copy_metrics(pair: QueryContextPair, method: CandidateMethod, text: str) -> CopyMetrics:
    """Copy metrics of one candidate against its pair's context.

    Citation markers are not context tokens; they are stripped from the
    measured text so they cannot deflate coverage.
    """
    measured = strip_citation_markers(text) if method is CandidateMethod.CITATIONS else text
    return copy_metrics(detect_fragments(tokenize(pair.context), tokenize(measured)))


def extract_sentences(
    pair: QueryContextPair,
    client: LLMClient,
    templates: TemplateSet,
    temperature: float = 0.0,
) -> ExtractionResult:
    """Common extraction step shared by the ordering and linking strategies.

    Every parsed sentence is checked verbatim (whitespace-normalized,
    case-sensitive) against the context; failures are dropped and
    counted. Zero verified sentences is an error the caller may retry
    or skip on.
    """
    prompt = templates.render("extract", context=pair.context, query=pair.query)
    reply = client.chat(user_request(client.chat_model_id, prompt, temperature=temperature))
    parsed = parse_extracted(reply.text)
    norm_context = normalize_ws(pair.context)
    verified = []
    dropped = 0
    for text in parsed:
        if normalize_ws(text) in norm_context:
            verified.append(
                ExtractedSentence(sent_id=f"SENT_{len(verified) + 1}", text=text, verified_in_context=True)
            )
        else:
            dropped += 1
    if not verified:
        raise ExtractionFailedError(f"no verified sentences for pair {pair.id} ({dropped} dropped)")
    return ExtractionResult(sentences=tuple(verified), dropped=dropped)


def cp_order(
    pair: QueryContextPair,
    sentences: Sequence[ExtractedSentence],
    client: LLMClient,
    templates: TemplateSet,
    temperature: float = 0.0,
) -> str:
    """Order verified sentences per the model's ORDER line and join them."""
    if not sentences:
        raise ValueError("cp_order needs at least one verified sentence")
    numbered = number_sentences([s.text for s in sentences])
    prompt = templates.render("order", query=pair.query, numbered_sentences=numbered)
    reply = client.chat(user_request(client.chat_model_id, prompt, temperature=temperature))
    ids = [s.sent_id for s in sentences]
    by_id = {s.sent_id: s.text for s in sentences}
    ordered = parse_order(reply.text, ids)
    return " ".join(by_id[sid] for sid in ordered)


def cp_link(
    pair: QueryContextPair,
    sentences: Sequence[ExtractedSentence],
    client: LLMClient,
    templates: TemplateSet,
    temperature: float = 0.0,
) -> LinkResult:
    """Join verified sentences with model-written transition glue.

    Transitions are truncated at 15 words; the core sentences go in
    verbatim. A reply with no parseable blocks falls back to plain
    joining, flagged.
    """
    if not sentences:
        raise ValueError("cp_link needs at least one verified sentence")
    numbered = number_sentences([s.text for s in sentences])
    prompt = templates.render("link", query=pair.query, numbered_sentences=numbered)
    reply = client.chat(user_request(client.chat_model_id, prompt, temperature=temperature))
    parts = parse_link(reply.text)
    pieces: list[str] = []
    if parts.intro:
        pieces.append(parts.intro)
    for i, sent in enumerate(sentences):
        pieces.append(sent.text)
        trans = parts.transitions.get((i + 1, i + 2))
        if trans:
            pieces.append(truncate_words(trans))
    if parts.conclusion:
        pieces.append(parts.conclusion)
    return LinkResult(text=" ".join(pieces), used_fallback=not parts.found_any)


def cp_refine(
    pair: QueryContextPair,
    cfg: CopyScoreConfig,
    t_max: int,
    client: LLMClient,
    templates: TemplateSet,
    temperature: float = 0.0,
) -> RefineOutcome:
    """Writer-reviewer refinement until the copy score meets its threshold.

    Each iteration scores the current draft, collects reviewer feedback
    (fed the current score), and either stops at the threshold or asks
    the writer to revise. Runs at most ``t_max`` iterations; an empty
    revision keeps the previous draft and still consumes the iteration.
    """
    if t_max < 1:
        raise ValueError("t_max must be >= 1")
    requirements = templates.load("copying_requirements")
    prompt = templates.render(
        "refine_writer", query=pair.query, context=pair.context, copying_requirements=requirements
    )
    draft = client.chat(user_request(client.chat_model_id, prompt, temperature=temperature)).text.strip()

    history: list[RefineState] = []
    context_tokens = tokenize(pair.context)
    for t in range(t_max):
        sigma = copy_score(copy_metrics(detect_fragments(context_tokens, tokenize(draft))), cfg)
        review_prompt = templates.render(
            "refine_reviewer",
            context=pair.context,
            query=pair.query,
            answer=draft,
            copying_score=f"{sigma:.4f}",
            copying_threshold=f"{cfg.threshold:.4f}",
        )
        feedback = client.chat(
            user_request(client.chat_model_id, review_prompt, temperature=temperature)
        ).text
        history.append(RefineState(iteration=t, answer=draft, feedback=feedback, score=sigma))
        if sigma >= cfg.threshold:
            return RefineOutcome(text=draft, history=tuple(history), met_threshold=True)
        if t + 1 < t_max:
            revise_prompt = templates.render(
                "refine_writer_revise",
                old_answer=draft,
                reviewer_suggestions=feedback,
                context=pair.context,
                query=pair.query,
                copying_requirements=requirements,
            )
            revised = client.chat(
                user_request(client.chat_model_id, revise_prompt, temperature=temperature)
            ).text.strip()
            if revised:
                draft = revised
    return RefineOutcome(text=draft, history=tuple(history), met_threshold=False)


def build_baseline_prompt(pair: QueryContextPair, method: CandidateMethod, templates: TemplateSet) -> str:
    if method is CandidateMethod.BASE:
        return templates.render("base", query=pair.query)
    if method is CandidateMethod.ATTRIBUTED:
        return templates.render("attributed", context=pair.context, query=pair.query)
    if method is CandidateMethod.CITATIONS:
        numbered = number_sentences(split_sentences(pair.context), style="bracket")
        return templates.render("citations", numbered_sentences=numbered, query=pair.query)
    raise ValueError(f"{method} is not a baseline method")


def generate_candidate(
    pair: QueryContextPair,
    method: CandidateMethod,
    client: LLMClient,
    templates: TemplateSet,
    score_cfg: CopyScoreConfig | None = None,
    t_max: int = 3,
    temperature: float = 0.0,
):
    """Produce one candidate for (pair, method).

    Strategy failures are recorded on the candidate rather than aborting
    the sample. Returns a prefbuild.Candidate.
    """
    from .prefbuild import Candidate, CandidateStatus

    cfg = score_cfg or CopyScoreConfig()
    note = ""
    try:
        if method.is_cp and method is not CandidateMethod.CP_REFINE:
            extraction = extract_sentences(pair, client, templates, temperature)
            if method is CandidateMethod.CP_ORDER:
                text = cp_order(pair, extraction.sentences, client, templates, temperature)
            else:
                link = cp_link(pair, extraction.sentences, client, templates, temperature)
                text = link.text
                if link.used_fallback:
                    note = "link-fallback"
        elif method is CandidateMethod.CP_REFINE:
            outcome = cp_refine(pair, cfg, t_max, client, templates, temperature)
            text = outcome.text
            if not outcome.met_threshold:
                note = "below-threshold"
        else:
            prompt = build_baseline_prompt(pair, method, templates)
            text = client.chat(user_request(client.chat_model_id, prompt, temperature=temperature)).text
    except CopyFaithError as exc:
        return Candidate(
            candidate_id=f"{pair.id}:{method.value}",
            pair_id=pair.id,
            method=method,
            text="",
            metrics=None,
            status=CandidateStatus.GEN_FAILED,
            note=f"{type(exc).__name__}: {exc}",
        )
    if not text.strip():
        # Downstream stages (judging, pairing) need non-empty texts.
        return Candidate(
            candidate_id=f"{pair.id}:{method.value}",
            pair_id=pair.id,
            method=method,
            text="",
            metrics=None,
            status=CandidateStatus.GEN_FAILED,
            note="empty-response",
        )
    return Candidate(
        candidate_id=f"{pair.id}:{method.value}",
        pair_id=pair.id,
        method=method,
        text=text,
        metrics=candidate_copy_metrics(pair, method, text),
        status=CandidateStatus.OK,
        note=note,
    )
