from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field

from .examples import Example, Partition
from .exceptions import InsufficientPartition
from .updates import UpdateSpec, VersionedDataset


class SplitSizes(BaseModel):
    """How many examples each split draws; ``v1_changed`` caps the conflicting V1 set (``None`` keeps all)."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    v2_changed: int = Field(50, ge=0)
    v2_unchanged: int = Field(50, ge=0)
    test_per_partition: int = Field(100, ge=1)
    v1_changed: int | None = Field(None, ge=0)


@dataclass(frozen=True)
class SplitBundle:
    spec: UpdateSpec
    seed: int
    v1_train: tuple[Example, ...]
    v2_train: tuple[Example, ...]
    test_changed: tuple[Example, ...]
    test_unchanged: tuple[Example, ...]
    test_triv: tuple[Example, ...]
    # true partition of every V1 example; only the oracle strategy may read it
    oracle_tags: dict[str, Partition] = field(repr=False)

    def test_sets(self) -> dict[Partition, tuple[Example, ...]]:
        return {
            Partition.CHANGED: self.test_changed,
            Partition.UNCHANGED: self.test_unchanged,
            Partition.TRIVIALLY_UNCHANGED: self.test_triv,
        }

    def v1_trivially_unchanged(self) -> list[Example]:
        """Identifiable from the V1 label alone, so any strategy may use it."""
        return [example for example in self.v1_train if self.spec.is_trivially_unchanged(example.v1_label)]

    def v1_affected(self) -> list[Example]:
        return [example for example in self.v1_train if not self.spec.is_trivially_unchanged(example.v1_label)]

    def conflicting_count(self) -> int:
        return sum(tag is Partition.CHANGED for tag in self.oracle_tags.values())


def sample_splits(data: VersionedDataset, sizes: SplitSizes, seed: int) -> SplitBundle:
    """
    Draw test sets first, then V2 train, and leave the rest as V1 train.

    Deterministic in (dataset, sizes, seed): every partition pool is sorted by
    id before being permuted by one seeded generator.
    """
    rng = np.random.default_rng(seed)
    test = sizes.test_per_partition
    needed = {
        Partition.CHANGED: test + sizes.v2_changed + (sizes.v1_changed or 0),
        Partition.UNCHANGED: test + sizes.v2_unchanged,
        Partition.TRIVIALLY_UNCHANGED: test,
    }
    shuffled = {}
    for partition in Partition:
        pool = sorted(data.partition(partition), key=lambda example: example.id)
        if len(pool) < needed[partition]:
            raise InsufficientPartition(partition.value, len(pool), needed[partition])
        shuffled[partition] = [pool[i] for i in rng.permutation(len(pool))]

    def as_test(examples):
        return tuple(example.with_labels(v1_label=None) for example in examples)

    changed = shuffled[Partition.CHANGED]
    unchanged = shuffled[Partition.UNCHANGED]
    triv = shuffled[Partition.TRIVIALLY_UNCHANGED]

    v2_train = changed[test:test + sizes.v2_changed] + unchanged[test:test + sizes.v2_unchanged]
    v1_changed = changed[test + sizes.v2_changed:]
    if sizes.v1_changed is not None:
        v1_changed = v1_changed[:sizes.v1_changed]
    v1_pool = v1_changed + unchanged[test + sizes.v2_unchanged:] + triv[test:]

    oracle_tags = {example.id: example.partition for example in v1_pool}
    bundle = SplitBundle(
        spec=data.spec,
        seed=seed,
        v1_train=tuple(sorted((e.with_labels(partition=None) for e in v1_pool), key=lambda e: e.id)),
        v2_train=tuple(sorted((e.with_labels(v1_label=None) for e in v2_train), key=lambda e: e.id)),
        test_changed=as_test(changed[:test]),
        test_unchanged=as_test(unchanged[:test]),
        test_triv=as_test(triv[:test]),
        oracle_tags=oracle_tags,
    )
    logger.debug(
        "Split {} (seed {}): v1={} (conflicting {}), v2={}, test={}x3",
        data.spec.name, seed, len(bundle.v1_train), bundle.conflicting_count(), len(bundle.v2_train), test,
    )
    return bundle
