"""Figure rendering for report artifacts (matplotlib, Agg backend).

Renders alongside the delimited output: a per-question score/gain chart from
the gain series and a grouped bar chart of the grid's Mean column. PNGs are
informational companions to the CSVs; byte-level determinism is only promised
for the text artifacts.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .pipeline import MODE_ORDER, Mode
from .report import GainSeries, ScoreGrid

GAINS_PNG = "gains.png"
GRID_PNG = "grid.png"

_MODE_COLORS = {Mode.DIRECT: "#b0b0b0", Mode.RAG: "#4878cf", Mode.AGENTIC: "#2e7d32"}


def render_gains_figure(gains: GainSeries, out_dir: str | Path) -> Path:
    """Per-question scores for the three modes, plus the two gain deltas."""
    questions = [row.question_id for row in gains.rows]
    x = range(len(questions))

    fig, (ax_scores, ax_gains) = plt.subplots(
        2, 1, figsize=(max(6.0, 0.6 * len(questions) + 2.0), 6.0), sharex=True)

    series = [
        ("direct", [r.direct for r in gains.rows], _MODE_COLORS[Mode.DIRECT]),
        ("rag", [r.rag for r in gains.rows], _MODE_COLORS[Mode.RAG]),
        ("agentic", [r.agentic for r in gains.rows], _MODE_COLORS[Mode.AGENTIC]),
    ]
    for label, values, color in series:
        ax_scores.plot(x, values, marker="o", label=label, color=color)
    ax_scores.set_ylabel("per-sample score")
    ax_scores.set_ylim(-0.02, 1.02)
    ax_scores.legend(loc="lower right")
    ax_scores.grid(True, alpha=0.3)

    width = 0.38
    ax_gains.bar([i - width / 2 for i in x], [r.gain_rag for r in gains.rows],
                 width=width, label="rag - direct", color=_MODE_COLORS[Mode.RAG])
    ax_gains.bar([i + width / 2 for i in x], [r.gain_agentic for r in gains.rows],
                 width=width, label="agentic - rag", color=_MODE_COLORS[Mode.AGENTIC])
    ax_gains.axhline(0.0, color="black", linewidth=0.8)
    ax_gains.set_ylabel("score gain")
    ax_gains.set_xticks(list(x))
    ax_gains.set_xticklabels(questions, rotation=45, ha="right")
    ax_gains.legend(loc="upper right")
    ax_gains.grid(True, alpha=0.3)

    fig.suptitle(f"base={gains.base_id}, judge={gains.judge_id}")
    fig.tight_layout()
    out = Path(out_dir) / GAINS_PNG
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def render_grid_figure(grid: ScoreGrid, out_dir: str | Path) -> Path:
    """Grouped bars: one group per base backend, one bar per mode (Mean column)."""
    bases = sorted({base for base, _ in grid.rows})
    modes = sorted({mode for _, mode in grid.rows}, key=lambda m: MODE_ORDER[m])

    fig, ax = plt.subplots(figsize=(max(6.0, 1.8 * len(bases) + 2.0), 4.0))
    group_width = 0.8
    bar_width = group_width / max(1, len(modes))
    for mode_index, mode in enumerate(modes):
        offsets, heights = [], []
        for base_index, base in enumerate(bases):
            mean = grid.row_mean(base, mode)
            if mean is None:
                continue
            offsets.append(base_index - group_width / 2 + bar_width * (mode_index + 0.5))
            heights.append(mean)
        ax.bar(offsets, heights, width=bar_width * 0.92, label=mode.value,
               color=_MODE_COLORS.get(mode))
    ax.set_xticks(range(len(bases)))
    ax.set_xticklabels(bases)
    ax.set_ylabel("mean score (judge average)")
    ax.set_ylim(0.0, 1.0)
    ax.legend(loc="upper left")
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    out = Path(out_dir) / GRID_PNG
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out
