"""
Training recipes for the nine update strategies.

A plan is pure data: which examples go to which decoder head, under which
loss mask, for how many steps. The experiment runner executes it.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

from loguru import logger
from pydantic import BaseModel, ConfigDict, Field

from core_apps.dataset import Example, Partition, SplitBundle, UpdateSpec
from core_apps.parser import MAIN_HEAD, MaskedExample, ParserConfig

from .classifier import ChangeDetector, filter_v1
from .exceptions import MissingClassifier, MultipleNewIntents

V1_HEAD = "v1"
V2_HEAD = "v2"
V1_PARSER_STAGE = "v1_parser"


class Strategy(str, Enum):
    V1_ONLY = "v1_only"
    V2_ONLY = "v2_only"
    DIRECT_MIX = "direct_mix"
    UPSAMPLED_MIX = "upsampled_mix"
    FINE_TUNE = "fine_tune"
    MULTI_TASK = "multi_task"
    SELECT_REMOVE = "select_remove"
    SELECT_INTENT_ONLY = "select_intent_only"
    ORACLE = "oracle"

    @property
    def needs_classifier(self) -> bool:
        return self in (Strategy.SELECT_REMOVE, Strategy.SELECT_INTENT_ONLY)

    @property
    def is_baseline(self) -> bool:
        return self in BASELINES


BASELINES = (Strategy.V1_ONLY, Strategy.V2_ONLY, Strategy.DIRECT_MIX, Strategy.UPSAMPLED_MIX)


class FineTuneConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    stage2_fraction: float = Field(0.2, gt=0.0, le=1.0)
    stage2_warmup_fraction: float = Field(0.1, ge=0.0, le=1.0)


@dataclass(frozen=True)
class TrainingStage:
    """
    One optimisation run. ``routed`` maps head name to its examples; a stage
    named ``v1_parser`` is the plain V1 model, identical across strategies
    for the same bundle, so it may be cached.
    """

    name: str
    routed: Mapping[str, tuple[MaskedExample, ...]]
    steps: int
    warmup_steps: int

    def size(self) -> int:
        return sum(len(examples) for examples in self.routed.values())


@dataclass(frozen=True)
class TrainingPlan:
    strategy: Strategy
    stages: tuple[TrainingStage, ...]
    heads: tuple[str, ...] = (MAIN_HEAD,)
    eval_head: str = MAIN_HEAD
    notes: tuple[str, ...] = field(default_factory=tuple)

    def examples(self, head: str | None = None) -> list[MaskedExample]:
        return [
            item
            for stage in self.stages
            for name, examples in stage.routed.items()
            if head is None or name == head
            for item in examples
        ]


def _full(examples: Sequence[Example], version: str) -> tuple[MaskedExample, ...]:
    return tuple(MaskedExample.full(example, getattr(example, f"{version}_label")) for example in examples)


def v1_data(bundle: SplitBundle) -> tuple[MaskedExample, ...]:
    return _full(bundle.v1_train, "v1")


def v2_data(bundle: SplitBundle) -> tuple[MaskedExample, ...]:
    """V2 train plus the trivially-unchanged part of V1, whose labels cannot be stale."""
    return _full(bundle.v2_train, "v2") + _full(bundle.v1_trivially_unchanged(), "v1")


def upsample_factor(bundle: SplitBundle) -> int:
    """Copies of V2 train so its changed part roughly matches the conflicting V1 count."""
    v2_changed = sum(example.partition is Partition.CHANGED for example in bundle.v2_train)
    if not v2_changed:
        return 1
    return max(1, round(bundle.conflicting_count() / v2_changed))


def intent_only_relabel(examples: Sequence[Example], spec: UpdateSpec) -> list[MaskedExample]:
    """
    Supervise only the root intent of suspected-stale V1 examples.

    An update introducing one intent relabels the root to it; an update that
    only changes arguments keeps the V1 root.
    """
    new_intents = spec.new_intents
    if len(new_intents) > 1:
        raise MultipleNewIntents(spec.name, new_intents)
    relabeled = []
    for example in examples:
        root = new_intents[0] if new_intents else example.v1_label.label
        relabeled.append(MaskedExample.intent_only(example, example.v1_label.relabel(root)))
    return relabeled


def build_training_plan(
    strategy: Strategy | str,
    bundle: SplitBundle,
    config: ParserConfig,
    classifier: ChangeDetector | None = None,
    fine_tune: FineTuneConfig | None = None,
) -> TrainingPlan:
    strategy = Strategy(strategy)
    fine_tune = fine_tune or FineTuneConfig()
    if strategy.needs_classifier and classifier is None:
        raise MissingClassifier(f"{strategy.value} needs a trained selection classifier")

    def stage(name, routed, steps=config.train_steps, warmup=config.warmup_steps):
        return TrainingStage(name, {head: tuple(items) for head, items in routed.items()}, steps, warmup)

    v1_stage = stage(V1_PARSER_STAGE, {MAIN_HEAD: v1_data(bundle)})
    notes: list[str] = []

    if strategy is Strategy.V1_ONLY:
        stages = [v1_stage]
    elif strategy is Strategy.V2_ONLY:
        stages = [stage("v2", {MAIN_HEAD: v2_data(bundle)})]
    elif strategy is Strategy.DIRECT_MIX:
        stages = [stage("mix", {MAIN_HEAD: v1_data(bundle) + _full(bundle.v2_train, "v2")})]
    elif strategy is Strategy.UPSAMPLED_MIX:
        factor = upsample_factor(bundle)
        notes.append(f"V2 train replicated x{factor}")
        stages = [stage("mix", {MAIN_HEAD: v1_data(bundle) + _full(bundle.v2_train, "v2") * factor})]
    elif strategy is Strategy.FINE_TUNE:
        steps = max(1, round(config.train_steps * fine_tune.stage2_fraction))
        warmup = round(steps * fine_tune.stage2_warmup_fraction)
        stages = [v1_stage, stage("v2", {MAIN_HEAD: v2_data(bundle)}, steps, warmup)]
    elif strategy is Strategy.MULTI_TASK:
        routed = {V1_HEAD: v1_data(bundle), V2_HEAD: v2_data(bundle)}
        return TrainingPlan(strategy, (stage("multi_task", routed),), heads=(V1_HEAD, V2_HEAD), eval_head=V2_HEAD)
    elif strategy.needs_classifier:
        kept, flagged = filter_v1(classifier, bundle.v1_affected())
        notes.append(f"classifier kept {len(kept)} and flagged {len(flagged)} affected V1 examples")
        data = v2_data(bundle) + _full(kept, "v1")
        if strategy is Strategy.SELECT_INTENT_ONLY:
            try:
                data += tuple(intent_only_relabel(flagged, bundle.spec))
            except MultipleNewIntents as err:
                notes.append(f"fell back to select_remove: {err}")
                logger.warning("{}: {}", bundle.spec.name, notes[-1])
        stages = [stage("selected", {MAIN_HEAD: data})]
    else:
        relabeled = [
            MaskedExample.full(
                example,
                example.v2_label if bundle.oracle_tags[example.id] is Partition.CHANGED else example.v1_label,
            )
            for example in bundle.v1_train
        ]
        stages = [stage("oracle", {MAIN_HEAD: tuple(relabeled) + _full(bundle.v2_train, "v2")})]

    return TrainingPlan(strategy, tuple(stages), notes=tuple(notes))
