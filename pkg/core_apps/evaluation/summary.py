"""Grid aggregation, macro averages and gap closure."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Iterable, Sequence

import pandas as pd

from core_apps.strategies import Strategy

from .exceptions import DegenerateGap, EvaluationError, IncompleteGrid
from .reports import PARTITION_ORDER, EvalReport

DECIMALS = 4
ORACLE = Strategy.ORACLE.value


def gap_closure(best_baseline_macro: float, method_macro: float, oracle_macro: float) -> float:
    """Percent of the baseline-to-oracle gap a method recovers."""
    gap = oracle_macro - best_baseline_macro
    if gap <= 0:
        raise DegenerateGap(
            f"oracle macro {oracle_macro} does not exceed the best baseline {best_baseline_macro}"
        )
    return 100.0 * (method_macro - best_baseline_macro) / gap


def strategy_order(names: Iterable[str]) -> list[str]:
    names = set(names)
    known = [strategy.value for strategy in Strategy if strategy.value in names]
    return known + sorted(names - set(known))


def baseline_names() -> list[str]:
    return [strategy.value for strategy in Strategy if strategy.is_baseline]


@dataclass(frozen=True)
class Summary:
    """
    ``per_update``: mean accuracy over seeds, indexed (update, partition), one column per strategy.
    ``means``: mean over updates and seeds, indexed by partition. ``macro``: mean of the three partitions.
    """

    per_update: pd.DataFrame
    means: pd.DataFrame
    macro: pd.Series
    updates: tuple[str, ...]
    seeds: tuple[int, ...]

    @property
    def strategies(self) -> list[str]:
        return list(self.means.columns)

    def best_baseline(self) -> str | None:
        baselines = [name for name in baseline_names() if name in self.macro.index]
        if not baselines:
            return None
        return max(baselines, key=lambda name: (self.macro[name], name))

    def gap_closures(self) -> dict[str, float]:
        baseline = self.best_baseline()
        if baseline is None or ORACLE not in self.macro.index:
            return {}
        methods = [name for name in self.strategies if name != ORACLE and name not in baseline_names()]
        return {
            name: round(gap_closure(self.macro[baseline], self.macro[name], self.macro[ORACLE]), 2)
            for name in methods
        }

    def headline(self) -> tuple[str, float] | None:
        closures = self.gap_closures()
        if not closures:
            return None
        best = max(closures, key=lambda name: (closures[name], name))
        return best, closures[best]

    def to_dict(self) -> dict:
        return {
            "updates": list(self.updates),
            "seeds": list(self.seeds),
            "strategies": self.strategies,
            "means": {
                strategy: {partition: float(self.means.at[partition, strategy]) for partition in self.means.index}
                for strategy in self.strategies
            },
            "macro": {strategy: float(self.macro[strategy]) for strategy in self.strategies},
            "per_update": {
                update: {
                    strategy: {
                        partition: float(self.per_update.at[(update, partition), strategy])
                        for partition in self.means.index
                    }
                    for strategy in self.strategies
                }
                for update in self.updates
            },
            "best_baseline": self.best_baseline(),
            "gap_closure": self.gap_closures(),
        }

    def to_frame(self) -> pd.DataFrame:
        frame = self.means.T.copy()
        frame["macro"] = self.macro
        frame.index.name = "strategy"
        return frame.reset_index()


def reports_frame(reports: Sequence[EvalReport]) -> pd.DataFrame:
    rows = [
        {
            "update": report.update,
            "strategy": report.strategy,
            "seed": report.seed,
            "partition": partition.value,
            "accuracy": report.accuracy(partition),
        }
        for report in reports
        for partition in PARTITION_ORDER
    ]
    return pd.DataFrame(rows, columns=["update", "strategy", "seed", "partition", "accuracy"])


def aggregate(
    reports: Sequence[EvalReport],
    strategies: Sequence[str] | None = None,
    updates: Sequence[str] | None = None,
    seeds: Sequence[int] | None = None,
) -> Summary:
    """
    Unweighted means over a complete strategy x update x seed grid.

    Rows are sorted before reducing so the result does not depend on the
    order reports arrive in.
    """
    if not reports:
        raise IncompleteGrid([])
    cells = [report.cell for report in reports]
    if len(set(cells)) != len(cells):
        raise EvaluationError("more than one report for the same (update, strategy, seed) cell")
    strategies = strategy_order(strategies or {report.strategy for report in reports})
    updates = sorted(updates or {report.update for report in reports})
    seeds = sorted(seeds or {report.seed for report in reports})
    missing = set(product(updates, strategies, seeds)) - set(cells)
    if missing:
        raise IncompleteGrid(missing)

    frame = reports_frame(reports)
    frame = frame[frame["strategy"].isin(strategies) & frame["update"].isin(updates) & frame["seed"].isin(seeds)]
    frame = frame.sort_values(["strategy", "update", "partition", "seed"], kind="mergesort")

    partitions = [p.value for p in PARTITION_ORDER]
    per_update = (
        frame.groupby(["update", "partition", "strategy"], sort=True)["accuracy"].mean().unstack("strategy")
    )
    per_update = per_update.reindex(
        pd.MultiIndex.from_product([updates, partitions], names=["update", "partition"])
    )[strategies]
    means = per_update.groupby(level="partition").mean().reindex(partitions)
    macro = means.mean(axis=0)
    return Summary(
        per_update=per_update.round(DECIMALS),
        means=means.round(DECIMALS),
        macro=macro.round(DECIMALS),
        updates=tuple(updates),
        seeds=tuple(seeds),
    )
