"""Plain-text tables for summaries and the conflict curve."""
from __future__ import annotations

import pandas as pd

from .summary import ORACLE, Summary

STRATEGY_LABELS = {
    "v1_only": "V1 only",
    "v2_only": "V2 only",
    "direct_mix": "Dir mix",
    "upsampled_mix": "Upsampl",
    "fine_tune": "Fine-tu",
    "multi_task": "Multi-t",
    "select_remove": "Sel(rm)",
    "select_intent_only": "Sel(io)",
    "oracle": "Oracle",
}
PARTITION_LABELS = {"changed": "Change", "unchanged": "Unchange", "trivially_unchanged": "Triv-unch"}


def percent(frame):
    return frame * 100.0


def _labels(columns):
    return [STRATEGY_LABELS.get(name, name) for name in columns]


def _text(frame: pd.DataFrame) -> str:
    return frame.to_string(float_format=lambda value: f"{value:.1f}")


def render_means(summary: Summary) -> str:
    """Averaged table: one row per partition plus the macro average, one column per strategy."""
    frame = percent(summary.means).rename(index=PARTITION_LABELS)
    frame.loc["Average"] = percent(summary.macro)
    frame.columns = _labels(frame.columns)
    frame.index.name = None
    return _text(frame)


def render_per_update(summary: Summary) -> str:
    frame = percent(summary.per_update).rename(index=PARTITION_LABELS, level="partition")
    averaged = percent(summary.means).rename(index=PARTITION_LABELS)
    averaged.index = pd.MultiIndex.from_product([["Avg"], averaged.index], names=frame.index.names)
    frame = pd.concat([frame, averaged])
    frame.columns = _labels(frame.columns)
    frame.index.names = [None, None]
    return _text(frame)


def render_gap_lines(summary: Summary) -> str:
    baseline = summary.best_baseline()
    closures = summary.gap_closures()
    if not closures:
        return "gap closure: needs at least one baseline, the oracle and one method"
    lines = [f"best baseline: {STRATEGY_LABELS.get(baseline, baseline)} ({100 * summary.macro[baseline]:.1f})"]
    for name, closure in closures.items():
        lines.append(f"gap closure {STRATEGY_LABELS.get(name, name)}: {closure:.1f}%")
    best, closure = summary.headline()
    lines.append(
        f"{STRATEGY_LABELS.get(best, best)} reaches {100 * summary.macro[best]:.1f} against "
        f"{100 * summary.macro[baseline]:.1f} for the best baseline and {100 * summary.macro[ORACLE]:.1f} "
        f"for the oracle, closing {closure:.0f}% of the gap"
    )
    return "\n".join(lines)


def render_report(summary: Summary) -> str:
    return "\n\n".join(
        [
            f"updates: {', '.join(summary.updates)}; seeds: {', '.join(map(str, summary.seeds))}",
            render_means(summary),
            render_per_update(summary),
            render_gap_lines(summary),
        ]
    ) + "\n"


def render_curve(table: pd.DataFrame) -> str:
    frame = percent(table)
    frame.columns = [name.replace("_", " ") for name in frame.columns]
    frame.index.names = [None, "V2 size"]
    return _text(frame) + "\n"
