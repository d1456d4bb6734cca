"""Experiment configuration: one YAML file validated into pydantic models."""
from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any, Literal, Sequence

import yaml
from pydantic import BaseModel, ConfigDict, Field, model_validator

from core_apps.dataset import DEFAULT_CORPUS_SIZE, GrammarConfig, SplitSizes, UpdateSpec, load_update_specs
from core_apps.evaluation import CURVE_SIZES
from core_apps.parser import DESK_OVERRIDES, ClassifierConfig, ParserConfig
from core_apps.strategies import FineTuneConfig, Strategy

from .exceptions import UnknownSelection

# fields that only choose which cells run
GRID_FIELDS = {"updates", "strategies", "seeds", "curve", "workers"}


def digest(payload) -> str:
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class _Section(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class CorpusSection(_Section):
    """``source`` is ``toy`` for the generated corpus, otherwise a path to a TSV file."""

    source: str = "toy"
    format: Literal["top", "corpus"] = "top"
    size: int = Field(DEFAULT_CORPUS_SIZE, ge=0)
    seed: int = 0

    @property
    def is_toy(self) -> bool:
        return self.source == "toy"


class ParserSection(_Section):
    full: ParserConfig = ParserConfig()
    desk: dict[str, Any] = Field(default_factory=lambda: dict(DESK_OVERRIDES))
    scale: Literal["full", "desk"] = "desk"

    def resolve(self) -> ParserConfig:
        if self.scale == "full":
            return self.full
        return self.full.desk_scale(**self.desk)


class CurveSection(_Section):
    sizes: list[int] = Field(default_factory=lambda: list(CURVE_SIZES))
    updates: list[str] | None = None
    test_per_partition: int = Field(100, ge=1)


class ExperimentConfig(_Section):
    corpus: CorpusSection = CorpusSection()
    grammar: GrammarConfig | None = None
    updates: list[UpdateSpec] = Field(default_factory=load_update_specs)
    splits: SplitSizes = SplitSizes()
    parser: ParserSection = ParserSection()
    classifier: ClassifierConfig = ClassifierConfig()
    fine_tune: FineTuneConfig = FineTuneConfig()
    strategies: list[Strategy] = Field(default_factory=lambda: list(Strategy))
    seeds: list[int] = Field(default_factory=lambda: [0, 1, 2, 3, 4])
    curve: CurveSection = CurveSection()
    workers: int = Field(1, ge=1)

    @model_validator(mode="after")
    def check_grid(self) -> ExperimentConfig:
        keys = [self.update_key(spec) for spec in self.updates]
        if len(set(keys)) != len(keys):
            raise ValueError(f"update keys must be unique, got {keys}")
        if not self.strategies or not self.seeds or not self.updates:
            raise ValueError("strategies, seeds and updates must each name at least one entry")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError(f"seeds must be unique, got {self.seeds}")
        return self

    @staticmethod
    def update_key(spec: UpdateSpec) -> str:
        return spec.key or spec.name

    @property
    def update_map(self) -> dict[str, UpdateSpec]:
        return {self.update_key(spec): spec for spec in self.updates}

    @property
    def parser_config(self) -> ParserConfig:
        return self.parser.resolve()

    def config_hash(self) -> str:
        """Hash of everything a finished cell depends on besides its own update spec."""
        return digest(self.model_dump(mode="json", exclude=GRID_FIELDS))

    def spec_hash(self, key: str) -> str:
        return digest(self.update_map[key].model_dump(mode="json"))

    def narrowed(
        self,
        strategies: Sequence[str] | None = None,
        updates: Sequence[str] | None = None,
        seeds: Sequence[int] | None = None,
        sizes: Sequence[int] | None = None,
        workers: int | None = None,
    ) -> ExperimentConfig:
        """A copy restricted to the given grid; every name must already be in the config."""
        changes: dict[str, Any] = {}
        if strategies:
            unknown = [name for name in strategies if name not in {s.value for s in self.strategies}]
            if unknown:
                raise UnknownSelection("strategies", unknown, [s.value for s in self.strategies])
            changes["strategies"] = [Strategy(name) for name in strategies]
        if updates:
            available = self.update_map
            unknown = [key for key in updates if key not in available]
            if unknown:
                raise UnknownSelection("updates", unknown, list(available))
            changes["updates"] = [available[key] for key in updates]
        if seeds:
            changes["seeds"] = list(seeds)
        if sizes:
            changes["curve"] = self.curve.model_copy(update={"sizes": list(sizes)})
        if workers:
            changes["workers"] = workers
        return self.model_validate({**self.model_dump(), **changes})


def load_experiment_config(path) -> ExperimentConfig:
    with open(Path(path), encoding="utf-8") as handle:
        return ExperimentConfig.model_validate(yaml.safe_load(handle) or {})
