"""Figure rendering for the delimited outputs.

Each report-producing command can drop a PNG next to its CSV/JSONL:
a coverage/density scatter for scored candidates and the per-position
knowledge-power profile (parametric side negated for display only).
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

_SAVE_KW = {"dpi": 120, "metadata": {"Software": None}}


def save_score_scatter(rows: Sequence[dict], path: str | Path) -> None:
    """Coverage vs. density per candidate, one color per method."""
    fig, ax = plt.subplots(figsize=(6, 4))
    methods = sorted({r["method"] for r in rows})
    cmap = plt.get_cmap("tab10")
    for i, method in enumerate(methods):
        xs = [r["coverage"] for r in rows if r["method"] == method]
        ys = [r["density"] for r in rows if r["method"] == method]
        ax.scatter(xs, ys, label=method, color=cmap(i % 10), alpha=0.75, edgecolors="none")
    ax.set_xlabel("copy coverage")
    ax.set_ylabel("copy density (tokens)")
    ax.set_xlim(-0.02, 1.02)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_power_profile(rows: Sequence[tuple], path: str | Path) -> None:
    """Context power above zero, parametric power mirrored below."""
    positions = [r[0] for r in rows]
    ctx = [r[1] for r in rows]
    para = [-r[2] for r in rows]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.fill_between(positions, ctx, step="mid", alpha=0.6, label="contextual")
    ax.fill_between(positions, para, step="mid", alpha=0.6, label="parametric (negated)")
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.set_xlabel("response position")
    ax.set_ylabel("power")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
