import filecmp
import tempfile
from io import StringIO
from pathlib import Path
from unittest import mock

import torch
import yaml
from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, tag
from pydantic import ValidationError

from core_apps.dataset import DegenerateGrammar, Partition
from core_apps.evaluation import REPORT_FILENAME, IncompleteGrid, aggregate
from core_apps.strategies import Strategy

from . import (
    Cell,
    CellFailures,
    ExperimentConfig,
    RunManifest,
    UnknownSelection,
    generate_data,
    grid_cells,
    grid_reports,
    load_experiment_config,
    run_curve,
    run_grid,
)
from . import runner

PUBLISHED_AVG = Path(settings.BASE_DIR) / "core_apps" / "evaluation" / "fixtures" / "published_results_avg.jsonl"

TINY = {
    "corpus": {"size": 1500, "seed": 0},
    "splits": {"v2_changed": 5, "v2_unchanged": 5, "test_per_partition": 5},
    "parser": {
        "desk": {
            "train_steps": 4,
            "warmup_steps": 1,
            "batch_size": 8,
            "model_dim": 16,
            "encoder_layers": 1,
            "encoder_ff_dim": 32,
            "decoder_ff_dim": 32,
            "log_every": 2,
        }
    },
    "classifier": {"train_steps": 2, "batch_size": 4, "hidden_dim": 8},
    "strategies": ["v1_only", "fine_tune", "multi_task", "select_intent_only"],
    "seeds": [0],
    "curve": {"sizes": [2, 4], "test_per_partition": 5},
}


def tiny_config(**changes):
    return ExperimentConfig.model_validate({**TINY, **changes}).narrowed(updates=["A", "D"])


def cell_files(out_dir):
    return sorted(path.relative_to(out_dir) for path in Path(out_dir).rglob(REPORT_FILENAME))


class ExperimentConfigTests(SimpleTestCase):
    def test_desk_config(self):
        config = load_experiment_config(settings.EXPERIMENT_CONFIG)
        self.assertEqual(list(config.update_map), ["A", "B", "C", "D", "E"])
        self.assertEqual(config.parser.full.train_steps, 50_000)
        self.assertEqual(config.parser.full.warmup_steps, 10_000)
        self.assertEqual(config.parser_config.train_steps, 5000)
        self.assertEqual(len(config.strategies), 9)
        self.assertEqual(len(grid_cells(config)), 225)

    def test_unknown_keys_rejected(self):
        with self.assertRaises(ValidationError):
            ExperimentConfig.model_validate({"seedz": [1]})
        with self.assertRaises(ValidationError):
            ExperimentConfig.model_validate({"parser": {"full": {"model_dim": 255}}})

    def test_narrowing(self):
        config = load_experiment_config(settings.EXPERIMENT_CONFIG).narrowed(
            strategies=["direct_mix", "oracle"], seeds=[1]
        )
        self.assertEqual(len(grid_cells(config)), 10)
        with self.assertRaises(UnknownSelection):
            config.narrowed(updates=["Z"])
        with self.assertRaises(UnknownSelection):
            config.narrowed(strategies=["v1_only"])

    def test_hash_tracks_training_settings_only(self):
        config = tiny_config()
        self.assertEqual(config.config_hash(), config.narrowed(seeds=[3], updates=["D"]).config_hash())
        changed = tiny_config(classifier={"train_steps": 3, "batch_size": 4, "hidden_dim": 8})
        self.assertNotEqual(config.config_hash(), changed.config_hash())
        self.assertNotEqual(config.spec_hash("A"), config.spec_hash("D"))


class GenerateTests(SimpleTestCase):
    def test_rerun_is_byte_identical(self):
        with tempfile.TemporaryDirectory() as first, tempfile.TemporaryDirectory() as second:
            generate_data(tiny_config(), first)
            generate_data(tiny_config(), second)
            names = ["data/corpus.tsv", "data/A/versioned.tsv", "data/D/versioned.tsv", "data/D/partitions.csv"]
            for name in names:
                self.assertTrue(filecmp.cmp(Path(first) / name, Path(second) / name, shallow=False), name)
            events = RunManifest(first).events("dataset_written")
        self.assertEqual([event["update"] for event in events], ["A", "D"])

    def test_update_naming_missing_intent(self):
        spec = {
            "name": "teleport",
            "key": "T",
            "affected_intents": ["IN:GET_DIRECTIONS"],
            "rules": [{"kind": "merge_intent", "new_intent": "IN:GET_TELEPORT", "merged_into": "IN:GET_DIRECTIONS"}],
        }
        config = ExperimentConfig.model_validate({**TINY, "updates": [spec]})
        with tempfile.TemporaryDirectory() as out:
            with self.assertRaises(DegenerateGrammar) as caught:
                generate_data(config, out)
        self.assertEqual(caught.exception.intent, "IN:GET_TELEPORT")


class GridTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.out = Path(self.tmp.name) / "run"
        self.config = tiny_config()
        generate_data(self.config, self.out)

    def test_full_grid(self):
        outcome = run_grid(self.config, self.out)
        self.assertEqual(len(outcome.completed), 8)
        self.assertEqual(len(grid_reports(self.config, self.out)), 8)
        self.assertTrue(any(self.out.joinpath("cache").rglob("v1_parser.pt")))
        for cell in outcome.completed:
            self.assertTrue((cell.directory(self.out) / "predictions.tsv").exists())
        summary = aggregate(grid_reports(self.config, self.out))
        self.assertEqual(summary.updates, ("A", "D"))
        manifest = RunManifest(self.out)
        for path in manifest.artifacts():
            self.assertTrue(path.exists(), path)

    def test_reruns_are_bit_identical(self):
        other = Path(self.tmp.name) / "again"
        generate_data(self.config, other)
        run_grid(self.config, self.out)
        run_grid(self.config, other)
        files = cell_files(self.out)
        self.assertEqual(files, cell_files(other))
        for name in files:
            self.assertTrue(filecmp.cmp(self.out / name, other / name, shallow=False), name)

    def test_resume_after_injected_failure(self):
        original = runner.run_cell

        def flaky(run, strategy):
            if run.key == "D" and strategy is Strategy.MULTI_TASK:
                raise RuntimeError("injected interruption")
            return original(run, strategy)

        with mock.patch.object(runner, "run_cell", side_effect=flaky):
            with self.assertRaises(CellFailures) as caught:
                run_grid(self.config, self.out)
        self.assertEqual([failure.key for failure in caught.exception.failures], ["D/multi_task/0"])
        self.assertIsInstance(caught.exception, IncompleteGrid)
        self.assertEqual(caught.exception.missing, [("D", "multi_task", "0")])
        self.assertEqual(len(cell_files(self.out)), 7)
        before = {name: (self.out / name).read_bytes() for name in cell_files(self.out)}

        outcome = run_grid(self.config, self.out)
        self.assertEqual(outcome.completed, [Cell("D", "multi_task", 0)])
        self.assertEqual(len(outcome.skipped), 7)
        for name, content in before.items():
            self.assertEqual((self.out / name).read_bytes(), content)

    def test_intent_only_fallback_is_recorded(self):
        config = ExperimentConfig.model_validate({**TINY, "strategies": ["select_intent_only"]}).narrowed(
            updates=["E"]
        )
        generate_data(config, self.out)
        run_grid(config, self.out)
        (done,) = [e for e in RunManifest(self.out).events("cell_done") if e["cell"] == "E/select_intent_only/0"]
        self.assertTrue(any("fell back to select_remove" in note for note in done["notes"]))

    def test_missing_data(self):
        with self.assertRaises(CellFailures) as caught:
            run_grid(self.config, Path(self.tmp.name) / "empty")
        self.assertEqual(len(caught.exception.failures), 8)
        self.assertIn("run `generate` first", caught.exception.failures[0].message)

    def test_edited_update_does_not_reuse_cached_v1_parser(self):
        original = runner.SeedRun(self.config, self.out, "A", 0)
        original.v1_parser()
        self.assertTrue(original.cache_path.exists())
        payload = self.config.model_dump(mode="json")
        payload["updates"][0]["rules"][0]["new_intent"] = "IN:GET_ESTIMATED_DEPARTURE"
        edited = ExperimentConfig.model_validate(payload)
        self.assertEqual(edited.config_hash(), self.config.config_hash())
        self.assertNotEqual(edited.spec_hash("A"), self.config.spec_hash("A"))

        generate_data(edited, self.out)
        rerun = runner.SeedRun(edited, self.out, "A", 0)
        self.assertNotEqual(rerun.cache_path, original.cache_path)
        self.assertFalse(rerun.cache_path.exists())

        fresh_out = Path(self.tmp.name) / "fresh"
        generate_data(edited, fresh_out)
        expected = runner.SeedRun(edited, fresh_out, "A", 0).v1_parser().state_dict()
        for name, value in rerun.v1_parser().state_dict().items():
            self.assertTrue(torch.equal(value, expected[name]), name)


class CurveTests(SimpleTestCase):
    def test_curve_outputs(self):
        config = tiny_config().narrowed(updates=["D"], seeds=[0, 1])
        with tempfile.TemporaryDirectory() as tmp:
            out = Path(tmp)
            generate_data(config, out)
            table = run_curve(config, out)
            for name in ("conflict_curve.png", "conflict_curve.svg", "conflict_curve.txt", "conflict_curve.csv"):
                self.assertTrue((out / "curve" / name).exists(), name)
        self.assertEqual(list(table.index), [("D", 2), ("D", 4), ("Average", 2), ("Average", 4)])
        self.assertEqual(list(table.columns), ["conflicting", "oracle_removed"])
        self.assertTrue(((table >= 0) & (table <= 1)).all().all())


class CommandTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.root = Path(self.tmp.name)

    def call(self, name, **options):
        stdout = StringIO()
        call_command(name, stdout=stdout, **options)
        return stdout.getvalue()

    def test_report_from_hand_written_file(self):
        out = self.root / "report"
        text = self.call("report", out=str(out), reports=str(PUBLISHED_AVG))
        self.assertIn("closing 86% of the gap", text)
        first = (out / "summary.txt").read_bytes()
        self.call("report", out=str(out), reports=str(PUBLISHED_AVG))
        self.assertEqual((out / "summary.txt").read_bytes(), first)
        self.assertTrue((out / "summary.json").exists())
        self.assertTrue((out / "summary.csv").exists())

    def test_report_without_reports(self):
        with self.assertRaisesMessage(CommandError, "no reports found"):
            self.call("report", out=str(self.root / "nothing"))

    def test_bad_config(self):
        with self.assertRaises(CommandError):
            self.call("generate", config=str(self.root / "missing.yaml"), out=str(self.root / "out"))
        broken = self.root / "broken.yaml"
        broken.write_text("corpus: [unclosed\n")
        with self.assertRaises(CommandError):
            self.call("generate", config=str(broken), out=str(self.root / "out"))
        invalid = self.root / "invalid.yaml"
        invalid.write_text("seeds: []\n")
        with self.assertRaisesMessage(CommandError, "invalid experiment config"):
            self.call("generate", config=str(invalid), out=str(self.root / "out"))

    def test_generate_run_report(self):
        config_path = self.root / "tiny.yaml"
        config_path.write_text(yaml.safe_dump(TINY))
        out = self.root / "out"
        self.call("generate", config=str(config_path), out=str(out), updates=["D"])
        text = self.call(
            "run", config=str(config_path), out=str(out), updates=["D"], strategies=["v1_only", "multi_task"], seeds=[0]
        )
        self.assertIn("2 cell(s) run", text)
        self.assertTrue((out / "run.log").exists())
        text = self.call("report", out=str(out))
        self.assertIn("Multi-t", text)


def accuracy(summary, strategy, partition):
    return 100 * summary.means.at[partition.value, strategy]


@tag("acceptance")
class DeskScaleAcceptanceTests(SimpleTestCase):
    """Directional checks on the toy corpus, three seeds and two updates."""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.tmp = tempfile.TemporaryDirectory()
        cls.out = Path(cls.tmp.name)
        config = load_experiment_config(settings.EXPERIMENT_CONFIG)
        cls.config = config.narrowed(updates=["A", "D"], seeds=[0, 1, 2])
        generate_data(cls.config, cls.out)

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()
        super().tearDownClass()

    def test_conflicting_data_hurts(self):
        table = run_curve(self.config, self.out)
        average = 100 * table.xs("Average", level="update")
        gap = average["oracle_removed"] - average["conflicting"]
        self.assertGreaterEqual(gap.loc[25], 10.0)
        self.assertTrue((gap > 0).all(), gap.to_dict())

    def test_strategy_ordering(self):
        run_grid(self.config, self.out)
        summary = aggregate(grid_reports(self.config, self.out))
        changed = {name: accuracy(summary, name, Partition.CHANGED) for name in summary.strategies}
        unchanged = {name: accuracy(summary, name, Partition.UNCHANGED) for name in summary.strategies}
        self.assertLessEqual(changed["direct_mix"], 15.0)
        for name in ("fine_tune", "multi_task", "select_intent_only"):
            self.assertGreaterEqual(changed[name] - changed["direct_mix"], 25.0, name)
        self.assertGreaterEqual(changed["select_intent_only"], changed["select_remove"])
        for name in summary.strategies:
            if name not in ("v2_only", "fine_tune"):
                self.assertLessEqual(abs(unchanged[name] - unchanged["v1_only"]), 10.0, name)
