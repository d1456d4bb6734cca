from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

SERIES_STYLE = {
    "conflicting": {"label": "with conflicting V1 data", "marker": "o", "color": "tab:red"},
    "oracle_removed": {"label": "conflicting data removed", "marker": "s", "color": "tab:blue"},
}


def plot_conflict_curve(table: pd.DataFrame, out_dir, stem: str = "conflict_curve") -> list[Path]:
    """Changed-partition accuracy against V2 size, averaged across updates; png and svg."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    average = table.xs("Average", level="update")

    fig, ax = plt.subplots(figsize=(6, 4))
    for condition in average.columns:
        style = SERIES_STYLE.get(condition, {"label": condition, "marker": "x"})
        ax.plot(average.index, 100 * average[condition], **style)
    ax.set_xscale("log", base=2)
    ax.set_xticks(list(average.index))
    ax.set_xticklabels([str(size) for size in average.index])
    ax.set_xlabel("V2 training examples (changed)")
    ax.set_ylabel("Changed-partition accuracy (%)")
    ax.set_title("Accuracy as a function of data size")
    ax.grid(True, alpha=0.3)
    ax.legend(loc="lower right")
    fig.tight_layout()

    paths = []
    for suffix in ("png", "svg"):
        path = out_dir / f"{stem}.{suffix}"
        # svg carries no creation date
        fig.savefig(path, dpi=150, metadata={"Date": None} if suffix == "svg" else None)
        paths.append(path)
    plt.close(fig)
    return paths
