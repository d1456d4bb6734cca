from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Mapping

from core_apps.parsetree import ParseTree, serialize


class Partition(str, Enum):
    CHANGED = "changed"
    UNCHANGED = "unchanged"
    TRIVIALLY_UNCHANGED = "trivially_unchanged"


@dataclass(frozen=True)
class Example:
    """
    One query with its versioned labels.

    V1-side examples keep their V2 label as well; that label (and the
    partition tag) are oracle-only information for V1 training data.
    """

    id: str
    query_tokens: tuple[str, ...]
    v1_label: ParseTree | None = None
    v2_label: ParseTree | None = None
    partition: Partition | None = None
    provenance: Mapping[str, Any] | None = field(default=None, compare=False, repr=False)

    @property
    def query(self) -> str:
        return " ".join(self.query_tokens)

    def render(self, label: ParseTree | None) -> str:
        return "" if label is None else serialize(label, self.query_tokens)

    def with_labels(self, **changes) -> Example:
        return replace(self, **changes)


def partition_counts(examples) -> dict[Partition, int]:
    counts = Counter(example.partition for example in examples)
    return {partition: counts.get(partition, 0) for partition in Partition}
