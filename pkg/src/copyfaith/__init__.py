"""Copy-based contextual faithfulness toolkit.

Measures how much of a generated answer is copied verbatim from its
context, drives high-copying response generation, builds preference
datasets from ranked candidates, and attributes per-token knowledge
use in generation traces.
"""

from .capture import CaptureResult, capture, common_substrings, position_power_profile
from .fragments import CopyFragment, FragmentSet, detect_fragments
from .judge import EloRating, JudgeDimension, Verdict, compare_pair, elo_update, run_tournament
from .metrics import CopyMetrics, CopyScoreConfig, copy_metrics, copy_score, logits_power
from .prefbuild import Candidate, PreferencePair, build_sample, export_dataset, stamp_answer
from .promptgen import CandidateMethod, QueryContextPair, TemplateSet, generate_candidate
from .textseg import Token, TokenKind, TokenSeq, tokenize
from .traceio import GenerationTrace, TraceStep, read_trace, write_trace

__all__ = [
    "Candidate",
    "CandidateMethod",
    "CaptureResult",
    "CopyFragment",
    "CopyMetrics",
    "CopyScoreConfig",
    "EloRating",
    "FragmentSet",
    "GenerationTrace",
    "JudgeDimension",
    "PreferencePair",
    "QueryContextPair",
    "TemplateSet",
    "Token",
    "TokenKind",
    "TokenSeq",
    "TraceStep",
    "Verdict",
    "build_sample",
    "capture",
    "common_substrings",
    "compare_pair",
    "copy_metrics",
    "copy_score",
    "detect_fragments",
    "elo_update",
    "export_dataset",
    "generate_candidate",
    "logits_power",
    "position_power_profile",
    "read_trace",
    "run_tournament",
    "stamp_answer",
    "tokenize",
    "write_trace",
]

__version__ = "0.1.0"
