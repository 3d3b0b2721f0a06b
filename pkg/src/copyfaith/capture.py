"""Token-level context-vs-parameter knowledge capture over trace pairs.

For each decoding step of a with-context run, scans the top-K candidate
tokens: skips meaningless tokens, stops at tokens common to both the
context and the context-free answer, and otherwise attributes the first
context-only or parametric-only token, collecting its probability and
hidden-state reference.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import CopyFaithError
from .fragments import detect_fragments, fragment_answer_surfaces
from .metrics import logits_power
from .textseg import TokenSeq, normalize_surface, tokenize


class TracePairingError(CopyFaithError):
    """The two traces do not form a with/without-context pair."""


class TraceDepthError(CopyFaithError):
    """Requested scan depth exceeds the recorded top-K."""


# Function words plus common auxiliaries; tokens matching these (after
# normalization) never count as knowledge captures.
DEFAULT_STOPLIST = frozenset(
    """
    a an the this that these those some any each every either neither
    and or but nor so yet for because although though while whereas if
    unless until since when whenever where wherever as than whether
    of in on at by with from into onto upon about against between among
    through during before after above below to up down out off over
    under again further per via
    is am are was were be been being do does did done have has had
    having will would shall should can could may might must ought
    not no also very too quite rather just only even still then there
    here it its it's they them their he she his her him we us our you
    your i me my
    """.split()
)


def is_meaningless(raw_surface: str, stoplist: frozenset[str] = DEFAULT_STOPLIST) -> bool:
    """Tokens that never count as knowledge: stoplist words, punctuation,
    sub-two-digit numerals, and subword continuation fragments (alphabetic
    surfaces with no leading whitespace, per the trace surface convention).
    """
    norm = normalize_surface(raw_surface.strip())
    if not norm:
        return True
    if norm in stoplist:
        return True
    if not any(ch.isalnum() for ch in norm):
        return True
    if norm.isdigit() and len(norm) < 2:
        return True
    if raw_surface[0].isalpha():
        # Word-initial tokens carry a leading space in trace surfaces;
        # an alphabetic first character marks a continuation piece.
        return True
    return False


def common_substrings(context: TokenSeq, a_para: TokenSeq, min_len: int = 3) -> frozenset[str]:
    """Surfaces inside context/parametric-answer runs of at least ``min_len``.

    Computed by fragment detection between the two sequences, keeping
    the surfaces of fragments long enough to count as shared phrasing.
    """
    if min_len < 1:
        raise ValueError("min_len must be >= 1")
    frags = detect_fragments(context, a_para)
    surfaces: set[str] = set()
    for frag in frags.fragments:
        if frag.length >= min_len:
            surfaces.update(fragment_answer_surfaces(frag, a_para))
    return frozenset(surfaces)


@dataclass
class CaptureResult:
    query_id: str
    p_ctx: list[float] = field(default_factory=list)
    p_para: list[float] = field(default_factory=list)
    h_ctx: list[int] = field(default_factory=list)
    h_para: list[int] = field(default_factory=list)
    t_ctx: list[str] = field(default_factory=list)
    t_para: list[str] = field(default_factory=list)
    positions_ctx: list[int] = field(default_factory=list)
    positions_para: list[int] = field(default_factory=list)

    def events(self) -> Iterable[dict]:
        for kind in ("ctx", "para"):
            ps = getattr(self, f"p_{kind}")
            hs = getattr(self, f"h_{kind}")
            ts = getattr(self, f"t_{kind}")
            pos = getattr(self, f"positions_{kind}")
            for p, h, t, i in zip(ps, hs, ts, pos):
                yield {
                    "query_id": self.query_id,
                    "kind": kind,
                    "position": i,
                    "token": t,
                    "probability": p,
                    "hidden_ref": h,
                }


def capture(
    ctx_trace,
    para_trace,
    context: TokenSeq,
    k: int,
    stoplist: frozenset[str] = DEFAULT_STOPLIST,
    min_common_len: int = 3,
) -> CaptureResult:
    """Classify each step's preferred tokens as contextual or parametric.

    Scans ranks 1..k per step of the with-context trace. Rank scan per
    step: meaningless tokens are skipped; a token shared by context and
    the context-free answer ends the step; a context token not yet
    captured is recorded as contextual, else a context-free-answer token
    not yet captured is recorded as parametric. At most one capture per
    step; each surface is captured once per side.
    """
    if not ctx_trace.with_context or para_trace.with_context:
        raise TracePairingError("need one with-context and one without-context trace")
    if ctx_trace.query_id != para_trace.query_id:
        raise TracePairingError(
            f"query_id mismatch: {ctx_trace.query_id!r} vs {para_trace.query_id!r}"
        )
    available = ctx_trace.min_topk()
    if k > available:
        raise TraceDepthError(f"k={k} exceeds recorded top-{available}")
    if k < 1:
        raise ValueError("k must be >= 1")

    a_para = tokenize(para_trace.generated_text)
    s_com = common_substrings(context, a_para, min_common_len)
    ctx_words = context.matchable_surface_set
    para_words = a_para.matchable_surface_set

    result = CaptureResult(query_id=ctx_trace.query_id)
    t_ctx: set[str] = set()
    t_para: set[str] = set()

    for step in ctx_trace.steps:
        for rank in range(k):
            raw, prob = step.topk[rank]
            if is_meaningless(raw, stoplist):
                continue
            norm = normalize_surface(raw.strip())
            if norm in s_com:
                break
            if norm in ctx_words and norm not in t_ctx:
                result.p_ctx.append(prob)
                result.h_ctx.append(step.hidden_ref)
                result.t_ctx.append(norm)
                result.positions_ctx.append(step.step_index)
                t_ctx.add(norm)
                break
            if norm in para_words and norm not in t_para:
                result.p_para.append(prob)
                result.h_para.append(step.hidden_ref)
                result.t_para.append(norm)
                result.positions_para.append(step.step_index)
                t_para.add(norm)
                break
    return result


def position_power_profile(
    results: Sequence[CaptureResult], max_len: int
) -> list[tuple[int, float, float, int, int]]:
    """Power aggregate of captured probabilities per response position.

    Rows are (position, ctx_power, para_power, n_ctx, n_para); empty
    buckets emit zero power with n=0. The parametric side is reported
    positive here; any sign flip is a rendering concern.
    """
    if not results:
        raise ValueError("results must be non-empty")
    ctx_buckets: dict[int, list[float]] = {}
    para_buckets: dict[int, list[float]] = {}
    for r in results:
        for pos, p in zip(r.positions_ctx, r.p_ctx):
            ctx_buckets.setdefault(pos, []).append(p)
        for pos, p in zip(r.positions_para, r.p_para):
            para_buckets.setdefault(pos, []).append(p)

    rows = []
    for pos in range(max_len):
        ctx = ctx_buckets.get(pos, [])
        para = para_buckets.get(pos, [])
        ctx_power = logits_power(ctx, len(ctx)) if ctx else 0.0
        para_power = logits_power(para, len(para)) if para else 0.0
        rows.append((pos, ctx_power, para_power, len(ctx), len(para)))
    return rows
