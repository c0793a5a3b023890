"""Report figures.  PNGs are written without timestamps so reruns are byte-identical."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .sessionize import DiagnosticsRow  # noqa: E402
from .stats import GroupComparison, Tier  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.titlesize": 9,
    "axes.labelsize": 9,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "legend.fontsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 120,
}
_PNG_META = {"Software": None}


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, metadata=_PNG_META, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_cutoff_diagnostics(rows: Sequence[DiagnosticsRow], path: str | Path, marks: Sequence[float] = ()) -> Path:
    """Three panels against the cutoff: session count, actions per session, gap."""
    cutoffs = [r.cutoff_minutes for r in rows]
    series = [
        ("total sessions", [r.total_sessions for r in rows]),
        ("mean actions / session", [r.mean_actions_per_session for r in rows]),
        ("mean gap between sessions (min)", [r.mean_inter_session_gap for r in rows]),
    ]
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, 3, figsize=(9, 2.8))
        for ax, (label, values) in zip(axes, series):
            ax.plot(cutoffs, values, marker="o", ms=3, lw=1, color="0.2")
            for m in marks:
                ax.axvline(m, color="tab:red", lw=0.8, ls="--")
            ax.set_xlabel("cutoff (min)")
            ax.set_title(label)
        fig.tight_layout()
        return _save(fig, Path(path))


def plot_group_supports(comparisons: Sequence[GroupComparison], path: str | Path, top: int = 15) -> Path:
    """Horizontal bars of mean support per group for the most common targets."""
    ranked = sorted(comparisons, key=lambda c: (-(c.mean_distinction + c.mean_nondistinction), c.target))[:top]
    ranked.reverse()
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(6, 0.3 * max(len(ranked), 3) + 1))
        ys = range(len(ranked))
        h = 0.4
        ax.barh([y + h / 2 for y in ys], [c.mean_distinction for c in ranked], h, label="distinction", color="0.25")
        ax.barh([y - h / 2 for y in ys], [c.mean_nondistinction for c in ranked], h, label="non-distinction", color="0.7")
        labels = []
        for c in ranked:
            mark = {Tier.SIGNIFICANT: " **", Tier.EDGE: " *"}.get(c.tier, "")
            labels.append(c.target + mark)
        ax.set_yticks(list(ys))
        ax.set_yticklabels(labels)
        ax.set_xlabel("mean support")
        ax.legend(loc="lower right", frameon=False)
        fig.tight_layout()
        return _save(fig, Path(path))
