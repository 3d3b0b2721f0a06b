"""Closed-form scores over fragment sets and capture buckets.

Copy coverage is the fraction of answer tokens inside some copied
fragment; copy density weights fragments by squared length, so long
verbatim spans dominate. The composite copy score blends the two and
is the refinement loop's stopping criterion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import CopyFaithError
from .fragments import FragmentSet


class EmptyBucketError(CopyFaithError):
    """Power aggregate requested for a position with no samples."""


@dataclass(frozen=True)
class CopyMetrics:
    coverage: float
    density: float
    answer_len: int
    degenerate: bool = False


@dataclass(frozen=True)
class CopyScoreConfig:
    alpha: float = 0.5
    beta: float = 0.5
    gamma: float = 10.0
    epsilon_cap: float = 0.5
    threshold: float = 0.8

    def __post_init__(self):
        if not all(
            math.isfinite(v)
            for v in (self.alpha, self.beta, self.gamma, self.epsilon_cap, self.threshold)
        ):
            raise ValueError("copy score parameters must be finite")
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if not 0 < self.beta <= 1:
            raise ValueError(f"beta must be in (0, 1], got {self.beta}")
        if self.gamma <= 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        if self.epsilon_cap < 0:
            raise ValueError(f"epsilon_cap must be >= 0, got {self.epsilon_cap}")
        if self.threshold > self.alpha + self.epsilon_cap:
            # Otherwise the refinement loop can never exit on the threshold branch.
            raise ValueError(
                f"threshold {self.threshold} exceeds alpha + epsilon_cap "
                f"= {self.alpha + self.epsilon_cap}"
            )


def copy_metrics(frags: FragmentSet) -> CopyMetrics:
    """Coverage and density of a fragment set.

    A zero-length answer yields the defined-empty result (both zero)
    flagged degenerate rather than an error.
    """
    n = frags.answer_len
    if n == 0:
        return CopyMetrics(coverage=0.0, density=0.0, answer_len=0, degenerate=True)
    total = sum(f.length for f in frags.fragments)
    squared = sum(f.length * f.length for f in frags.fragments)
    return CopyMetrics(coverage=total / n, density=squared / n, answer_len=n)


def copy_score(m: CopyMetrics, cfg: CopyScoreConfig) -> float:
    """Composite score: alpha * coverage + min(density**beta / gamma, cap).

    Monotone non-decreasing in both coverage and density; never exceeds
    alpha + epsilon_cap.
    """
    return cfg.alpha * m.coverage + min(m.density**cfg.beta / cfg.gamma, cfg.epsilon_cap)


def logits_power(values: list[float], n: int) -> float:
    """Position-bucket power aggregate: (sum of squared values) * sqrt(n).

    ``n`` is the number of samples contributing at this response
    position; ``values`` are the captured probabilities there.
    """
    if n < 1:
        raise EmptyBucketError("power aggregate needs at least one contributing sample")
    return sum(v * v for v in values) * math.sqrt(n)
