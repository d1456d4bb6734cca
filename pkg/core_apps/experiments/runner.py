"""
Drivers behind the management commands: data generation, the strategy grid
and the conflict-effect sweep.

Work is grouped per (update, seed) pair so the split, the vocabularies and
the cached V1 parser are built once and shared by every strategy of the
pair. Groups run inline or on a spawn-based process pool; only the parent
process writes the manifest.
"""
from __future__ import annotations

import json
import multiprocessing
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path
from typing import Any, Callable, Iterator, Sequence

import pandas as pd
import torch
from django.conf import settings
from loguru import logger

from core_apps.common.logging import add_run_sink
from core_apps.common.seeding import derive_seed
from core_apps.dataset import (
    PUBLISHED_PARTITION_SIZES,
    Example,
    Partition,
    VersionedDataset,
    build_version_pair,
    default_grammar,
    generate_toy_corpus,
    load_corpus,
    load_top_tsv,
    load_versioned,
    sample_splits,
    save_corpus,
    save_versioned,
)
from core_apps.evaluation import (
    REPORT_FILENAME,
    EvalReport,
    Summary,
    aggregate,
    conflict_curve,
    curve_sizes,
    curve_table,
    evaluate,
    load_reports,
    render_curve,
    render_report,
    write_predictions,
    write_report,
)
from core_apps.parser import (
    MAIN_HEAD,
    ActionVocabulary,
    ParserModel,
    Vocabulary,
    build_parser,
    load_checkpoint,
    save_checkpoint,
    train,
    train_routed,
)
from core_apps.strategies import (
    V1_PARSER_STAGE,
    Strategy,
    build_training_plan,
    train_selection_classifier,
    v1_data,
)

from .config import ExperimentConfig
from .exceptions import CellFailures, MissingData
from .manifest import RunManifest
from .plots import plot_conflict_curve

DATA_DIR = "data"
CELLS_DIR = "cells"
CACHE_DIR = "cache"
PREDICTIONS_FILENAME = "predictions.tsv"


@dataclass(frozen=True, order=True)
class Cell:
    update: str
    strategy: str
    seed: int

    @property
    def key(self) -> str:
        return f"{self.update}/{self.strategy}/{self.seed}"

    def directory(self, out_dir) -> Path:
        return Path(out_dir) / CELLS_DIR / self.update / self.strategy / str(self.seed)


@dataclass(frozen=True)
class CellFailure:
    key: str
    message: str


@dataclass(frozen=True)
class CellResult:
    cell: Cell
    report: str | None = None
    predictions: str | None = None
    notes: tuple[str, ...] = ()
    checkpoint: str | None = None
    error: str | None = None


@dataclass
class GridOutcome:
    cells: list[Cell]
    completed: list[Cell] = field(default_factory=list)
    skipped: list[Cell] = field(default_factory=list)
    failures: list[CellFailure] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def relative(path: Path, out_dir) -> str:
    return Path(path).relative_to(Path(out_dir)).as_posix()


def grid_cells(config: ExperimentConfig) -> list[Cell]:
    return [
        Cell(key, strategy.value, seed)
        for key, strategy, seed in product(config.update_map, config.strategies, config.seeds)
    ]


def versioned_path(out_dir, key: str) -> Path:
    return Path(out_dir) / DATA_DIR / key / "versioned.tsv"


# Data generation


def build_corpus(config: ExperimentConfig) -> list[Example]:
    corpus = config.corpus
    if not corpus.is_toy:
        path = Path(corpus.source)
        return load_top_tsv(path) if corpus.format == "top" else load_corpus(path)
    grammar = (config.grammar or default_grammar()).check()
    for spec in config.updates:
        grammar.check_intents(spec.intents())
    return generate_toy_corpus(grammar, seed=corpus.seed, size=corpus.size)


def generate_data(config: ExperimentConfig, out_dir) -> dict[str, VersionedDataset]:
    out_dir = Path(out_dir)
    manifest = RunManifest(out_dir)
    manifest.append(
        "generate_started",
        config_hash=config.config_hash(),
        corpus=config.corpus.source,
        updates=list(config.update_map),
    )
    corpus = build_corpus(config)
    corpus_path = save_corpus(corpus, out_dir / DATA_DIR / "corpus.tsv")
    manifest.append("corpus_written", path=relative(corpus_path, out_dir), size=len(corpus))

    datasets = {}
    for key, spec in config.update_map.items():
        dataset = build_version_pair(corpus, spec)
        path = save_versioned(dataset, versioned_path(out_dir, key))
        counts = {partition.value: count for partition, count in dataset.counts().items()}
        counts_path = path.with_name("partitions.csv")
        pd.DataFrame(
            [{"update": key, "partition": name, "count": count} for name, count in counts.items()]
        ).to_csv(counts_path, index=False)
        reference = PUBLISHED_PARTITION_SIZES.get(key)
        if reference:
            logger.info("Update {}: generated {} (full TOP corpus: {})", key, tuple(counts.values()), reference)
        manifest.append(
            "dataset_written",
            update=key,
            spec_hash=config.spec_hash(key),
            path=relative(path, out_dir),
            paths=[relative(counts_path, out_dir)],
            counts=counts,
        )
        datasets[key] = dataset
    return datasets


def load_dataset(config: ExperimentConfig, out_dir, key: str) -> VersionedDataset:
    path = versioned_path(out_dir, key)
    if not path.exists():
        raise MissingData(f"no generated data for update {key} at {path}; run `generate` first")
    return load_versioned(path, config.update_map[key])


# Strategy grid


class SeedRun:
    """What the cells of one (update, seed) pair share: split, vocabularies and the V1 parser."""

    def __init__(self, config: ExperimentConfig, out_dir, key: str, seed: int):
        self.config = config
        self.out_dir = Path(out_dir)
        self.key = key
        self.seed = seed
        self.dataset = load_dataset(config, out_dir, key)
        self.bundle = sample_splits(self.dataset, config.splits, seed=seed)
        self.parser_config = config.parser_config
        self.token_vocab = Vocabulary.build(
            example.query_tokens for example in self.bundle.v1_train + self.bundle.v2_train
        )
        self.action_vocab = ActionVocabulary.build(
            label for example in self.dataset.examples for label in (example.v1_label, example.v2_label)
        )
        self._v1_parser: ParserModel | None = None

    @property
    def cache_path(self) -> Path:
        # the V1 labels depend on the update spec, which the config hash leaves out
        spec_dir = f"{self.key}-{self.config.spec_hash(self.key)[:12]}"
        return self.out_dir / CACHE_DIR / self.config.config_hash()[:12] / spec_dir / str(self.seed) / "v1_parser.pt"

    def fresh_parser(self, heads=(MAIN_HEAD,)) -> ParserModel:
        return build_parser(
            self.parser_config, self.token_vocab, self.action_vocab, heads=heads,
            seed=derive_seed(self.key, self.seed, "init"),
        )

    def v1_parser(self) -> ParserModel:
        """A private copy of the plain V1 parser, trained once and cached on disk."""
        if self._v1_parser is None:
            if self.cache_path.exists():
                logger.info("Reusing V1 parser for {}/{} from {}", self.key, self.seed, self.cache_path)
                self._v1_parser = load_checkpoint(self.cache_path)
            else:
                model = train(
                    self.fresh_parser(),
                    v1_data(self.bundle),
                    self.parser_config,
                    seed=derive_seed(self.key, self.seed, V1_PARSER_STAGE),
                )
                save_checkpoint(model, self.cache_path)
                self._v1_parser = model
        return self._v1_parser.clone()


def run_cell(run: SeedRun, strategy: Strategy) -> EvalReport:
    config, bundle = run.config, run.bundle
    classifier = None
    if strategy.needs_classifier:
        classifier = train_selection_classifier(
            bundle.v2_train, run.v1_parser(), config.classifier, seed=derive_seed(run.key, run.seed, "classifier")
        )
    plan = build_training_plan(strategy, bundle, run.parser_config, classifier=classifier, fine_tune=config.fine_tune)
    model = None
    for stage in plan.stages:
        if stage.name == V1_PARSER_STAGE:
            model = run.v1_parser()
            continue
        model = model or run.fresh_parser(plan.heads)
        logger.debug("{} {}/{}: stage {} on {} examples", strategy.value, run.key, run.seed, stage.name, stage.size())
        train_routed(
            model,
            stage.routed,
            run.parser_config,
            seed=derive_seed(run.key, run.seed, strategy.value, stage.name),
            steps=stage.steps,
            warmup_steps=stage.warmup_steps,
        )
    return evaluate(model, plan.eval_head, bundle, strategy.value, notes=plan.notes)


def run_seed_cells(
    config_data: dict, out_dir: str, key: str, seed: int, strategies: Sequence[str]
) -> list[CellResult]:
    """Worker entry point: every requested strategy of one (update, seed) pair."""
    config = ExperimentConfig.model_validate(config_data)
    cells = [Cell(key, strategy, seed) for strategy in strategies]
    try:
        run = SeedRun(config, out_dir, key, seed)
    except Exception as err:
        logger.exception("Could not prepare {}/{}", key, seed)
        return [CellResult(cell, error=f"{type(err).__name__}: {err}") for cell in cells]

    results = []
    for cell in cells:
        try:
            report = run_cell(run, Strategy(cell.strategy))
            directory = cell.directory(out_dir)
            report_path = write_report(report, directory / REPORT_FILENAME)
            predictions_path = write_predictions(report, run.bundle, directory / PREDICTIONS_FILENAME)
        except Exception as err:
            logger.exception("Cell {} failed", cell.key)
            results.append(CellResult(cell, error=f"{type(err).__name__}: {err}"))
            continue
        for note in report.notes:
            logger.info("{}: {}", cell.key, note)
        results.append(
            CellResult(
                cell,
                report=relative(report_path, out_dir),
                predictions=relative(predictions_path, out_dir),
                notes=report.notes,
                checkpoint=relative(run.cache_path, out_dir) if run.cache_path.exists() else None,
            )
        )
    return results


def init_worker(log_path: str | None, num_threads: int) -> None:
    import django

    django.setup()
    torch.set_num_threads(num_threads)
    if log_path:
        add_run_sink(Path(log_path), enqueue=True)


def dispatch(fn: Callable, tasks: Sequence[tuple], workers: int, log_path=None) -> Iterator[tuple[tuple, Any]]:
    """Yield ``(args, result)`` per task; a task that raised yields its exception as the result."""
    if workers <= 1 or len(tasks) <= 1:
        torch.set_num_threads(settings.TORCH_NUM_THREADS)
        for args in tasks:
            try:
                yield args, fn(*args)
            except Exception as err:
                logger.exception("Task {} failed", args[2:])
                yield args, err
        return

    context = multiprocessing.get_context("spawn")
    with ProcessPoolExecutor(
        max_workers=workers,
        mp_context=context,
        initializer=init_worker,
        initargs=(str(log_path) if log_path else None, settings.TORCH_NUM_THREADS),
    ) as pool:
        futures = {pool.submit(fn, *args): args for args in tasks}
        for future in as_completed(futures):
            try:
                yield futures[future], future.result()
            except Exception as err:
                logger.error("Worker for {} died: {}", futures[future][2:], err)
                yield futures[future], err


def run_grid(config: ExperimentConfig, out_dir) -> GridOutcome:
    """
    Run every strategy x update x seed cell not already finished under the
    same config hash, then raise ``CellFailures`` if any cell failed.
    """
    out_dir = Path(out_dir)
    manifest = RunManifest(out_dir)
    config_hash = config.config_hash()
    done = manifest.completed_cells(config_hash)
    outcome = GridOutcome(cells=grid_cells(config))
    manifest.append(
        "run_started",
        config_hash=config_hash,
        corpus=config.corpus.source,
        updates={key: config.spec_hash(key) for key in config.update_map},
        strategies=[strategy.value for strategy in config.strategies],
        seeds=config.seeds,
        workers=config.workers,
    )

    groups: dict[tuple[str, int], list[str]] = defaultdict(list)
    for cell in outcome.cells:
        record = done.get(cell.key)
        fresh = record and record.get("spec_hash") == config.spec_hash(cell.update)
        if fresh and (out_dir / record["report"]).exists():
            outcome.skipped.append(cell)
            continue
        groups[(cell.update, cell.seed)].append(cell.strategy)
    if outcome.skipped:
        logger.info("Skipping {} finished cell(s)", len(outcome.skipped))

    config_data = config.model_dump(mode="json")
    tasks = [(config_data, str(out_dir), key, seed, strategies) for (key, seed), strategies in sorted(groups.items())]
    for args, results in dispatch(run_seed_cells, tasks, config.workers, out_dir / "run.log"):
        if isinstance(results, Exception):
            results = [CellResult(Cell(args[2], strategy, args[3]), error=str(results)) for strategy in args[4]]
        for result in results:
            if result.error:
                outcome.failures.append(CellFailure(result.cell.key, result.error))
                manifest.append("cell_failed", cell=result.cell.key, config_hash=config_hash, error=result.error)
                continue
            outcome.completed.append(result.cell)
            manifest.append(
                "cell_done",
                cell=result.cell.key,
                config_hash=config_hash,
                spec_hash=config.spec_hash(result.cell.update),
                report=result.report,
                predictions=result.predictions,
                notes=list(result.notes),
                checkpoint=result.checkpoint,
            )
            logger.info("Finished cell {}", result.cell.key)

    manifest.append(
        "run_finished",
        config_hash=config_hash,
        completed=len(outcome.completed),
        skipped=len(outcome.skipped),
        failed=len(outcome.failures),
    )
    if outcome.failures:
        raise CellFailures(outcome.failures)
    return outcome


def grid_reports(config: ExperimentConfig, out_dir) -> list[EvalReport]:
    reports = []
    for cell in grid_cells(config):
        path = cell.directory(out_dir) / REPORT_FILENAME
        if path.exists():
            reports.extend(load_reports(path))
    return reports


def summarize(reports: Sequence[EvalReport], out_dir, config: ExperimentConfig | None = None) -> Summary:
    out_dir = Path(out_dir)
    if config is None:
        summary = aggregate(reports)
    else:
        summary = aggregate(
            reports,
            strategies=[strategy.value for strategy in config.strategies],
            updates=list(config.update_map),
            seeds=config.seeds,
        )
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "summary.txt").write_text(render_report(summary), encoding="utf-8")
    with open(out_dir / "summary.json", "w", encoding="utf-8") as handle:
        json.dump(summary.to_dict(), handle, indent=2, sort_keys=True)
        handle.write("\n")
    summary.to_frame().to_csv(out_dir / "summary.csv", index=False)
    return summary


# Conflict-effect sweep


def run_curve_update(
    config_data: dict, out_dir: str, key: str, sizes: Sequence[int], seeds: Sequence[int]
) -> list[dict]:
    config = ExperimentConfig.model_validate(config_data)
    dataset = load_dataset(config, out_dir, key)
    parser_config = config.parser_config
    action_vocab = ActionVocabulary.build(
        label for example in dataset.examples for label in (example.v1_label, example.v2_label)
    )

    def bundle_factory(size, seed):
        return sample_splits(dataset, curve_sizes(size, config.curve.test_per_partition), seed=seed)

    def score(bundle, data, seed):
        token_vocab = Vocabulary.build(example.query_tokens for example in bundle.v1_train + bundle.v2_train)
        model = build_parser(parser_config, token_vocab, action_vocab, seed=derive_seed(key, seed, "init"))
        train(model, data, parser_config, seed=derive_seed(key, seed, "curve", len(bundle.v2_train)))
        return evaluate(model, MAIN_HEAD, bundle).accuracy(Partition.CHANGED)

    return conflict_curve(bundle_factory, sizes, seeds, score).to_dict("records")


def run_curve(config: ExperimentConfig, out_dir) -> pd.DataFrame:
    out_dir = Path(out_dir)
    manifest = RunManifest(out_dir)
    keys = config.curve.updates or list(config.update_map)
    manifest.append(
        "curve_started",
        config_hash=config.config_hash(),
        updates=keys,
        sizes=config.curve.sizes,
        seeds=config.seeds,
    )
    config_data = config.model_dump(mode="json")
    tasks = [(config_data, str(out_dir), key, config.curve.sizes, config.seeds) for key in keys]
    rows, failures = [], []
    for args, result in dispatch(run_curve_update, tasks, config.workers, out_dir / "run.log"):
        if isinstance(result, Exception):
            failures.append(CellFailure(f"{args[2]}/curve", f"{type(result).__name__}: {result}"))
            manifest.append("cell_failed", cell=failures[-1].key, error=failures[-1].message)
            continue
        rows.extend(result)
    if failures:
        raise CellFailures(failures)

    points = pd.DataFrame(rows).sort_values(["update", "size", "condition", "seed"], kind="mergesort")
    table = curve_table(points)
    curve_dir = out_dir / "curve"
    curve_dir.mkdir(parents=True, exist_ok=True)
    points.to_csv(curve_dir / "conflict_curve_points.csv", index=False)
    table.to_csv(curve_dir / "conflict_curve.csv")
    (curve_dir / "conflict_curve.txt").write_text(render_curve(table), encoding="utf-8")
    paths = [curve_dir / name for name in ("conflict_curve_points.csv", "conflict_curve.csv", "conflict_curve.txt")]
    paths += plot_conflict_curve(table, curve_dir)
    manifest.append("curve_finished", config_hash=config.config_hash(), paths=[relative(p, out_dir) for p in paths])
    return table
