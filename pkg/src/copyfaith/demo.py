"""Deterministic offline backend for demos and end-to-end tests.

Routes each prompt by its template markers and synthesizes a rule-based
reply: extraction echoes context sentences, the writer copies the
context, the judge prefers the response sharing more words with the
context. Every rule is a pure function of the prompt, so repeated runs
are byte-identical.
"""

from __future__ import annotations

import hashlib
import math
import re
import threading

from .filterbank import ScorerSet
from .llmclient import ChatRequest, ChatResponse, EmbeddingVector
from .promptgen import split_sentences
from .textseg import tokenize

_CONTEXT_PATTERNS = [
    re.compile(r"Context\n\n(.*?)\n\n(?:Query|Copying Requirements)", re.DOTALL),
    re.compile(r"Context: (.*?)\n\n(?:Query:|Response A:)", re.DOTALL),
    re.compile(r"Context:\n(.*?)\n\nQuestion:", re.DOTALL),
]

_SENT_ID_RE = re.compile(r"\bSENT_(\d+):")
_RESPONSE_A_RE = re.compile(r"Response A: (.*?)\n\nResponse B:", re.DOTALL)
_RESPONSE_B_RE = re.compile(r"Response B: (.*?)\n\nPlease note:", re.DOTALL)

PARAMETRIC_REPLY = (
    "Drawing purely on general background knowledge, one would expect "
    "an answer shaped by broad priors rather than any supplied passage."
)


def _context_block(prompt: str) -> str:
    for pattern in _CONTEXT_PATTERNS:
        m = pattern.search(prompt)
        if m:
            return m.group(1).strip()
    return ""


def _word_set(text: str) -> frozenset[str]:
    return tokenize(text).matchable_surface_set


class DemoBackend:
    """Offline generator/judge/embedding backend with scripted rules."""

    def __init__(self):
        self._lock = threading.Lock()
        self.chat_calls = 0
        self.embed_calls = 0

    def complete(self, req: ChatRequest) -> ChatResponse:
        with self._lock:
            self.chat_calls += 1
        prompt = req.messages[-1][1]
        return ChatResponse(text=self._reply(prompt))

    def _reply(self, prompt: str) -> str:
        if 'preceded by "EXTRACTED: "' in prompt:
            context = _context_block(prompt)
            sentences = split_sentences(context)
            return "\n".join(f"EXTRACTED: {s}" for s in sentences) or "EXTRACTED:"

        if "comma-separated list of sentence IDs" in prompt:
            ids = [f"SENT_{n}" for n in _SENT_ID_RE.findall(prompt)]
            return "ORDER: " + ",".join(ids)

        if "Please generate transitions:" in prompt:
            count = len(_SENT_ID_RE.findall(prompt))
            lines = [
                f"[TRANSITION_{i}_{i + 1}]Moreover,[/TRANSITION_{i}_{i + 1}]"
                for i in range(1, count)
            ]
            return "\n".join(lines) if lines else "[INTRO]In summary:[/INTRO]"

        if "Reviewer has suggested revisions" in prompt or "skilled at copying" in prompt:
            return "According to the context, " + _context_block(prompt)

        if "review the answer to the query" in prompt:
            return (
                "1. Quote more of the context verbatim. "
                "2. Remove any claim not present in the context. "
                "3. Address the query directly."
            )

        if "expert judge" in prompt:
            return self._judge_reply(prompt)

        if "output only a single token" in prompt:
            return "A"

        if "think step-by-step" in prompt:
            return "Based on the context: " + _context_block(prompt)

        if "strictly based on the following context" in prompt:
            context = _context_block(prompt)
            first = split_sentences(context)[:1]
            return (first[0] + " That is what the context establishes.") if first else ""

        if "numbered passages" in prompt:
            sentences = re.findall(r"\[(\d+)\] (.+)", prompt)
            cited = [f"{text} [{num}]" for num, text in sentences[:2]]
            return " ".join(cited)

        return PARAMETRIC_REPLY

    def _judge_reply(self, prompt: str) -> str:
        context_words = _word_set(_context_block(prompt))
        a_m = _RESPONSE_A_RE.search(prompt)
        b_m = _RESPONSE_B_RE.search(prompt)
        if not a_m or not b_m:
            return '{"verdict": "TIE"}'
        a_text, b_text = a_m.group(1), b_m.group(1)
        # More shared context vocabulary wins; shorter text breaks ties.
        a_key = (len(_word_set(a_text) & context_words), -len(a_text))
        b_key = (len(_word_set(b_text) & context_words), -len(b_text))
        if a_key > b_key:
            return '{"verdict": "A"}'
        if b_key > a_key:
            return '{"verdict": "B"}'
        return '{"verdict": "TIE"}'

    def embed(self, text: str, model_id: str, dim: int = 64) -> EmbeddingVector:
        with self._lock:
            self.embed_calls += 1
        values = [0.0] * dim
        for word in tokenize(text).matchable_surfaces:
            digest = hashlib.sha256(word.encode("utf-8")).digest()
            idx = int.from_bytes(digest[:4], "little") % dim
            sign = 1.0 if digest[4] % 2 == 0 else -1.0
            values[idx] += sign
        norm = math.sqrt(sum(v * v for v in values))
        if norm == 0:
            values[0] = 1.0
            norm = 1.0
        return EmbeddingVector(values=tuple(v / norm for v in values), model_id=model_id)


def demo_scorers() -> ScorerSet:
    """Constant pass-grade scorers standing in for remote endpoints."""
    return ScorerSet(
        faith_doc=lambda payload: 0.9,
        faith_sent=lambda payload: 0.85,
        fluency_ppl=lambda payload: 20.0,
    )
