"""Per-cell exact-match reports and their line-delimited persistence."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from loguru import logger

from core_apps.dataset import Partition, SplitBundle
from core_apps.parser import ParserModel, Prediction, predict_batch
from core_apps.parsetree import exact_match

from .exceptions import EvaluationError, NoReportsFound

REPORT_FILENAME = "report.jsonl"
PARTITION_ORDER = (Partition.CHANGED, Partition.UNCHANGED, Partition.TRIVIALLY_UNCHANGED)


@dataclass(frozen=True)
class PartitionScore:
    numerator: int
    denominator: int

    @property
    def accuracy(self) -> float:
        return self.numerator / self.denominator if self.denominator else 0.0


@dataclass(frozen=True)
class EvalReport:
    update: str
    strategy: str
    seed: int
    scores: Mapping[Partition, PartitionScore]
    notes: tuple[str, ...] = ()
    predictions: Mapping[str, Prediction] = field(default_factory=dict, compare=False, repr=False)

    @property
    def cell(self) -> tuple[str, str, int]:
        return self.update, self.strategy, self.seed

    def accuracy(self, partition: Partition) -> float:
        return self.scores[partition].accuracy

    def records(self) -> list[dict]:
        return [
            {
                "update": self.update,
                "strategy": self.strategy,
                "seed": self.seed,
                "partition": partition.value,
                "numerator": self.scores[partition].numerator,
                "denominator": self.scores[partition].denominator,
                "notes": list(self.notes),
            }
            for partition in PARTITION_ORDER
        ]

    @classmethod
    def from_records(cls, records: Iterable[Mapping]) -> list[EvalReport]:
        grouped: dict[tuple, dict] = {}
        notes: dict[tuple, tuple] = {}
        for record in records:
            cell = (str(record["update"]), str(record["strategy"]), int(record["seed"]))
            partition = Partition(record["partition"])
            if partition in grouped.setdefault(cell, {}):
                raise EvaluationError(f"duplicate {partition.value} record for cell {cell}")
            grouped[cell][partition] = PartitionScore(int(record["numerator"]), int(record["denominator"]))
            notes[cell] = tuple(record.get("notes", ()))
        reports = []
        for cell, scores in grouped.items():
            missing = [p.value for p in PARTITION_ORDER if p not in scores]
            if missing:
                raise EvaluationError(f"cell {cell} lacks records for {', '.join(missing)}")
            reports.append(cls(*cell, scores=scores, notes=notes[cell]))
        return reports


def evaluate(
    model: ParserModel,
    head: str,
    bundle: SplitBundle,
    strategy: str = "",
    notes: Iterable[str] = (),
) -> EvalReport:
    """Exact match against V2 labels on each test partition; invalid decodes never match."""
    scores, predictions = {}, {}
    for partition, examples in bundle.test_sets().items():
        decoded = predict_batch(model, [example.query_tokens for example in examples], head)
        hits = 0
        for example, prediction in zip(examples, decoded):
            predictions[example.id] = prediction
            hits += prediction.valid and exact_match(prediction.tree, example.v2_label)
        scores[partition] = PartitionScore(hits, len(examples))
    return EvalReport(
        update=bundle.spec.key or bundle.spec.name,
        strategy=strategy,
        seed=bundle.seed,
        scores=scores,
        notes=tuple(notes),
        predictions=predictions,
    )


def write_report(report: EvalReport, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    partial = path.with_name(path.name + ".partial")
    with open(partial, "w", encoding="utf-8") as handle:
        for record in report.records():
            handle.write(json.dumps(record, sort_keys=True) + "\n")
    partial.replace(path)
    return path


def write_predictions(report: EvalReport, bundle: SplitBundle, path) -> Path:
    """id, partition, valid flag and predicted canonical parse (empty when nothing was recovered)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for partition, examples in bundle.test_sets().items():
            for example in examples:
                prediction = report.predictions[example.id]
                handle.write(
                    f"{example.id}\t{partition.value}\t{int(prediction.valid)}\t{example.render(prediction.tree)}\n"
                )
    return path


def read_records(path) -> list[dict]:
    with open(path, encoding="utf-8") as handle:
        return [json.loads(line) for line in handle if line.strip()]


def load_reports(location) -> list[EvalReport]:
    """Reports from one ``.jsonl`` file or from every ``report.jsonl`` under a directory."""
    location = Path(location)
    if location.is_file():
        paths = [location]
    elif location.is_dir():
        paths = sorted(location.rglob(REPORT_FILENAME))
    else:
        paths = []
    records = [record for path in paths for record in read_records(path)]
    if not records:
        raise NoReportsFound(f"no reports found under {location}")
    reports = EvalReport.from_records(records)
    logger.debug("Loaded {} reports from {} file(s) under {}", len(reports), len(paths), location)
    return reports
