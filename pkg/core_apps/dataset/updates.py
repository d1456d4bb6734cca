"""
Declarative schema updates and their reverse transforms.

The corpus is treated as the post-update (V2) form; each rule of an
``UpdateSpec`` rewrites matching V2 trees into the pre-update (V1) form.
"""
from __future__ import annotations

from functools import lru_cache
from pathlib import Path
from typing import Annotated, Iterable, Literal, Union

import yaml
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, model_validator

from core_apps.parsetree import ParseTree, exact_match, top_intent

from .examples import Example, Partition, partition_counts
from .exceptions import AmbiguousRules, MissingV2Label


class RenameArguments(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    rename: dict[str, str]


ArgumentPolicy = Union[Literal["keep", "drop_all"], RenameArguments]


class MergeIntent(BaseModel):
    """Fold ``new_intent`` back into ``merged_into``; optionally only trees with/without arguments."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["merge_intent"] = "merge_intent"
    new_intent: str
    merged_into: str
    argument_policy: ArgumentPolicy = "keep"
    has_arguments: bool | None = None

    def selects(self, tree: ParseTree) -> bool:
        if top_intent(tree) != self.new_intent:
            return False
        return self.has_arguments is None or tree.has_arguments == self.has_arguments

    def apply(self, tree: ParseTree) -> ParseTree:
        children = tree.children
        if self.argument_policy == "drop_all":
            children = ()
        elif isinstance(self.argument_policy, RenameArguments):
            mapping = self.argument_policy.rename
            children = tuple(child.relabel(mapping.get(child.label, child.label)) for child in children)
        return tree.relabel(self.merged_into).with_children(children)

    @property
    def affected(self) -> set[str]:
        return {self.merged_into}


class RemoveArgument(BaseModel):
    """Strip every ``slot_label`` argument held by an intent in ``intent_set``."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["remove_argument"] = "remove_argument"
    intent_set: list[str]
    slot_label: str

    def selects(self, tree: ParseTree) -> bool:
        return any(
            node.is_intent and node.label in self.intent_set
            and any(child.label == self.slot_label for child in node.children)
            for node in tree.iter_nodes()
        )

    def apply(self, tree: ParseTree) -> ParseTree:
        children = tree.children
        if tree.is_intent and tree.label in self.intent_set:
            children = tuple(child for child in children if child.label != self.slot_label)
        return tree.with_children([self.apply(child) for child in children])

    @property
    def affected(self) -> set[str]:
        return set(self.intent_set)


ReverseRule = Annotated[Union[MergeIntent, RemoveArgument], Field(discriminator="kind")]


class UpdateSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str
    key: str = ""
    description: str = ""
    affected_intents: list[str]
    rules: list[ReverseRule] = []

    @model_validator(mode="after")
    def rules_touch_only_affected_intents(self) -> UpdateSpec:
        for rule in self.rules:
            missing = rule.affected - set(self.affected_intents)
            if missing:
                raise ValueError(f"rule {rule.kind} targets intents outside affected_intents: {sorted(missing)}")
        return self

    @property
    def affected(self) -> frozenset[str]:
        return frozenset(self.affected_intents)

    @property
    def new_intents(self) -> list[str]:
        return sorted({rule.new_intent for rule in self.rules if isinstance(rule, MergeIntent)})

    def intents(self) -> set[str]:
        names = set(self.affected_intents)
        for rule in self.rules:
            names |= {rule.new_intent, rule.merged_into} if isinstance(rule, MergeIntent) else set(rule.intent_set)
        return names

    def is_trivially_unchanged(self, v1_label: ParseTree) -> bool:
        return top_intent(v1_label) not in self.affected


def classify_partition(v1_label: ParseTree, v2_label: ParseTree | None, affected: Iterable[str]) -> Partition:
    if top_intent(v1_label) not in set(affected):
        return Partition.TRIVIALLY_UNCHANGED
    if v2_label is None:
        raise MissingV2Label(f"{top_intent(v1_label)} is affected by the update but no V2 label was supplied")
    return Partition.UNCHANGED if exact_match(v1_label, v2_label) else Partition.CHANGED


def apply_reverse_update(v2_example: Example | ParseTree, spec: UpdateSpec) -> ParseTree:
    """V1 form of a V2 label; untouched when no rule selects it."""
    tree = v2_example.v2_label if isinstance(v2_example, Example) else v2_example
    if tree is None:
        raise MissingV2Label(f"example {v2_example.id} has no V2 label to transform")
    fired = [rule for rule in spec.rules if rule.selects(tree)]
    if len(fired) > 1:
        raise AmbiguousRules(f"{len(fired)} rules of update {spec.name!r} select {top_intent(tree)}")
    return fired[0].apply(tree) if fired else tree


class VersionedDataset:
    def __init__(self, examples: Iterable[Example], spec: UpdateSpec):
        self.examples = tuple(examples)
        self.spec = spec

    def __len__(self) -> int:
        return len(self.examples)

    def partition(self, partition: Partition) -> list[Example]:
        return [example for example in self.examples if example.partition is partition]

    def counts(self) -> dict[Partition, int]:
        return partition_counts(self.examples)


def build_version_pair(corpus: Iterable[Example], spec: UpdateSpec) -> VersionedDataset:
    examples = []
    for example in corpus:
        v1_label = apply_reverse_update(example, spec)
        partition = classify_partition(v1_label, example.v2_label, spec.affected)
        examples.append(example.with_labels(v1_label=v1_label, partition=partition))
    dataset = VersionedDataset(examples, spec)
    logger.info(
        "Built versions for update {}: {}",
        spec.name,
        ", ".join(f"{p.value}={n}" for p, n in dataset.counts().items()),
    )
    return dataset


DEFAULT_UPDATES_PATH = Path(__file__).resolve().parent / "data" / "toy_updates.yaml"


def load_update_specs(path=DEFAULT_UPDATES_PATH) -> list[UpdateSpec]:
    with open(path) as handle:
        return [UpdateSpec.model_validate(item) for item in yaml.safe_load(handle)]


@lru_cache(maxsize=1)
def default_updates() -> dict[str, UpdateSpec]:
    """The five toy updates keyed by their short key (``A`` to ``E``)."""
    return {spec.key or spec.name: spec for spec in load_update_specs()}
