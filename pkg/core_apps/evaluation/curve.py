"""
Conflict-effect sweep: changed-partition accuracy as V2 grows, with and
without the stale V1 changed examples in the training data.
"""
from __future__ import annotations

from enum import Enum
from typing import Callable, Iterable, Sequence

import pandas as pd
from loguru import logger

from core_apps.dataset import Partition, SplitBundle, SplitSizes
from core_apps.parser import MaskedExample

CURVE_SIZES = (25, 50, 100, 200)
CONFLICTING_V1 = 50
CURVE_COLUMNS = ["update", "size", "condition", "seed", "accuracy"]


class CurveCondition(str, Enum):
    CONFLICTING = "conflicting"
    ORACLE_REMOVED = "oracle_removed"


def curve_sizes(size: int, test_per_partition: int = 100) -> SplitSizes:
    return SplitSizes(
        v2_changed=size, v2_unchanged=0, v1_changed=CONFLICTING_V1, test_per_partition=test_per_partition
    )


def curve_training_data(bundle: SplitBundle, condition: CurveCondition | str) -> tuple[MaskedExample, ...]:
    """V1 with its stored labels plus V2; ``oracle_removed`` drops the changed part of V1."""
    condition = CurveCondition(condition)
    v1 = bundle.v1_train
    if condition is CurveCondition.ORACLE_REMOVED:
        v1 = [example for example in v1 if bundle.oracle_tags[example.id] is not Partition.CHANGED]
    return tuple(MaskedExample.full(example, example.v1_label) for example in v1) + tuple(
        MaskedExample.full(example, example.v2_label) for example in bundle.v2_train
    )


Scorer = Callable[[SplitBundle, Sequence[MaskedExample], int], float]


def conflict_curve(
    bundle_factory: Callable[[int, int], SplitBundle],
    sizes: Iterable[int],
    seeds: Iterable[int],
    score: Scorer,
    conditions: Iterable[CurveCondition | str] = tuple(CurveCondition),
) -> pd.DataFrame:
    """
    One row per (size, condition, seed). ``bundle_factory(size, seed)`` is
    called once per pair so both conditions see the same V2 train set;
    ``score`` trains on the given data and returns changed-partition accuracy.
    """
    conditions = [CurveCondition(condition) for condition in conditions]
    rows = []
    for size in sorted(sizes):
        for seed in sorted(seeds):
            bundle = bundle_factory(size, seed)
            for condition in conditions:
                accuracy = score(bundle, curve_training_data(bundle, condition), seed)
                logger.info(
                    "curve {} size={} seed={} {}: changed={:.3f}",
                    bundle.spec.key or bundle.spec.name, size, seed, condition.value, accuracy,
                )
                rows.append([bundle.spec.key or bundle.spec.name, size, condition.value, seed, accuracy])
    return pd.DataFrame(rows, columns=CURVE_COLUMNS)


def curve_table(points: pd.DataFrame) -> pd.DataFrame:
    """
    Seed means per (update, size) with one column per condition, followed by
    an ``Average`` block across updates.
    """
    points = points.sort_values(["update", "size", "condition", "seed"], kind="mergesort")
    per_update = points.groupby(["update", "size", "condition"], sort=True)["accuracy"].mean().unstack("condition")
    average = per_update.groupby(level="size").mean()
    average.index = pd.MultiIndex.from_product([["Average"], average.index], names=["update", "size"])
    order = [c.value for c in CurveCondition if c.value in per_update.columns]
    return pd.concat([per_update, average])[order].round(4)
