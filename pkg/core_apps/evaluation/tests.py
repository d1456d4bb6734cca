import random
import tempfile
from pathlib import Path
from unittest import mock

from django.test import SimpleTestCase

from core_apps.dataset import Example, Partition, SplitBundle, SplitSizes, default_updates
from core_apps.parser import Prediction
from core_apps.parsetree import parse_bracketed

from . import (
    CurveCondition,
    DegenerateGap,
    EvalReport,
    EvaluationError,
    IncompleteGrid,
    NoReportsFound,
    PartitionScore,
    aggregate,
    conflict_curve,
    curve_sizes,
    curve_table,
    curve_training_data,
    evaluate,
    gap_closure,
    load_reports,
    read_records,
    render_curve,
    render_report,
    write_predictions,
    write_report,
)

FIXTURES = Path(__file__).resolve().parent / "fixtures"
PUBLISHED = FIXTURES / "published_results.jsonl"
PUBLISHED_AVG = FIXTURES / "published_results_avg.jsonl"

UNSUPPORTED = "(IN:UNSUPPORTED_NAVIGATION )"
TRAFFIC = '(IN:GET_INFO_TRAFFIC (SL:LOCATION "the highway" ) )'


def report(update="D", strategy="oracle", seed=0, hits=(50, 60, 70), total=100, notes=()):
    scores = {p: PartitionScore(h, total) for p, h in zip(Partition, hits)}
    return EvalReport(update, strategy, seed, scores, notes=notes)


def make_example(index, partition, label):
    tokens = ("is", "there", "traffic", "on", "the", "highway", "?")
    return Example(
        id=f"t{partition.value[0]}-{index:03d}",
        query_tokens=tokens,
        v2_label=parse_bracketed(label, tokens),
        partition=partition,
    )


def counting_bundle(unsupported_in_changed=7):
    changed = [
        make_example(i, Partition.CHANGED, UNSUPPORTED if i < unsupported_in_changed else TRAFFIC) for i in range(100)
    ]
    unchanged = [make_example(i, Partition.UNCHANGED, TRAFFIC) for i in range(100)]
    triv = [make_example(i, Partition.TRIVIALLY_UNCHANGED, UNSUPPORTED) for i in range(100)]
    return SplitBundle(
        spec=default_updates()["D"],
        seed=4,
        v1_train=(),
        v2_train=(),
        test_changed=tuple(changed),
        test_unchanged=tuple(unchanged),
        test_triv=tuple(triv),
        oracle_tags={},
    )


def constant_predictor(text, valid=True):
    def predict_batch(model, queries, head):
        return [Prediction(parse_bracketed(text, query), valid, ()) for query in queries]

    return predict_batch


class EvaluateTests(SimpleTestCase):
    def run_constant(self, text, valid=True):
        with mock.patch("core_apps.evaluation.reports.predict_batch", constant_predictor(text, valid)):
            return evaluate(None, "main", counting_bundle(), strategy="oracle")

    def test_counting_oracle(self):
        result = self.run_constant(UNSUPPORTED)
        self.assertEqual(result.scores[Partition.CHANGED], PartitionScore(7, 100))
        self.assertAlmostEqual(result.accuracy(Partition.CHANGED), 0.07)
        self.assertEqual(result.accuracy(Partition.UNCHANGED), 0.0)
        self.assertEqual(result.accuracy(Partition.TRIVIALLY_UNCHANGED), 1.0)
        self.assertEqual(result.cell, ("D", "oracle", 4))

    def test_invalid_decodes_never_match(self):
        result = self.run_constant(UNSUPPORTED, valid=False)
        self.assertEqual([score.numerator for score in result.scores.values()], [0, 0, 0])

    def test_prediction_dump(self):
        bundle = counting_bundle()
        with mock.patch("core_apps.evaluation.reports.predict_batch", constant_predictor(TRAFFIC)):
            result = evaluate(None, "main", bundle)
        with tempfile.TemporaryDirectory() as tmp:
            path = write_predictions(result, bundle, Path(tmp) / "predictions.tsv")
            lines = path.read_text().splitlines()
        self.assertEqual(len(lines), 300)
        self.assertEqual(lines[0].split("\t"), ["tc-000", "changed", "1", TRAFFIC])


class AggregateTests(SimpleTestCase):
    def test_published_arithmetic(self):
        summary = aggregate(load_reports(PUBLISHED_AVG))
        self.assertAlmostEqual(100 * summary.macro["v2_only"], 51.8, places=1)
        self.assertAlmostEqual(100 * summary.macro["oracle"], 74.7, places=1)
        self.assertAlmostEqual(100 * summary.macro["select_intent_only"], 71.5, places=1)
        self.assertEqual(summary.best_baseline(), "v2_only")
        best, closure = summary.headline()
        self.assertEqual(best, "select_intent_only")
        self.assertAlmostEqual(closure, 86.0, delta=0.5)

    def test_published_per_update_rows(self):
        summary = aggregate(load_reports(PUBLISHED))
        self.assertEqual(summary.updates, ("A", "B", "C", "D", "E"))
        means = 100 * summary.means["v2_only"]
        self.assertAlmostEqual(means["changed"], 53.8, places=1)
        self.assertAlmostEqual(means["unchanged"], 24.0, delta=0.05)
        self.assertAlmostEqual(means["trivially_unchanged"], 77.6, delta=0.05)
        self.assertAlmostEqual(summary.gap_closures()["select_intent_only"], 86.0, delta=0.5)

    def test_single_report(self):
        summary = aggregate([report()])
        self.assertEqual(list(summary.means["oracle"]), [0.5, 0.6, 0.7])
        self.assertAlmostEqual(summary.macro["oracle"], 0.6)

    def test_order_does_not_matter(self):
        reports = load_reports(PUBLISHED)
        shuffled = list(reports)
        random.Random(7).shuffle(shuffled)
        self.assertEqual(aggregate(reports).to_dict(), aggregate(shuffled).to_dict())

    def test_macro_within_partition_range(self):
        summary = aggregate(load_reports(PUBLISHED))
        for strategy in summary.strategies:
            column = summary.means[strategy]
            self.assertLessEqual(column.min(), summary.macro[strategy])
            self.assertGreaterEqual(column.max(), summary.macro[strategy])

    def test_incomplete_grid(self):
        reports = [report("A", "oracle", 0), report("A", "oracle", 1), report("B", "oracle", 0)]
        with self.assertRaises(IncompleteGrid) as caught:
            aggregate(reports)
        self.assertEqual(caught.exception.missing, [("B", "oracle", 1)])

    def test_duplicate_cell(self):
        with self.assertRaises(EvaluationError):
            aggregate([report(), report()])

    def test_strategy_order_is_canonical(self):
        summary = aggregate([report(strategy="oracle"), report(strategy="v1_only")])
        self.assertEqual(summary.strategies, ["v1_only", "oracle"])


class GapClosureTests(SimpleTestCase):
    def test_reported_closure(self):
        self.assertAlmostEqual(gap_closure(51.8, 71.5, 74.7), 86.0, delta=0.5)

    def test_endpoints(self):
        self.assertEqual(gap_closure(40.0, 40.0, 60.0), 0.0)
        self.assertEqual(gap_closure(40.0, 60.0, 60.0), 100.0)

    def test_degenerate(self):
        for oracle in (50.0, 49.0):
            with self.assertRaises(DegenerateGap):
                gap_closure(50.0, 55.0, oracle)

    def test_closures_skip_baselines(self):
        summary = aggregate(load_reports(PUBLISHED_AVG))
        self.assertEqual(summary.best_baseline(), "v2_only")
        self.assertEqual(
            list(summary.gap_closures()), ["fine_tune", "multi_task", "select_remove", "select_intent_only"]
        )

    def test_no_gap_without_oracle(self):
        summary = aggregate([report(strategy="v2_only"), report(strategy="multi_task")])
        self.assertEqual(summary.gap_closures(), {})
        self.assertIsNone(summary.headline())


class ReportFileTests(SimpleTestCase):
    def test_round_trip(self):
        original = report(notes=("fell back to select_remove: two new intents",))
        with tempfile.TemporaryDirectory() as tmp:
            path = write_report(original, Path(tmp) / "D" / "oracle" / "0" / "report.jsonl")
            records = read_records(path)
            loaded = load_reports(tmp)
        self.assertEqual(len(records), 3)
        self.assertEqual(set(records[0]), {"update", "strategy", "seed", "partition", "numerator", "denominator", "notes"})
        self.assertEqual(loaded, [original])

    def test_empty_directory(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(NoReportsFound):
                load_reports(tmp)
            with self.assertRaises(NoReportsFound):
                load_reports(Path(tmp) / "missing")

    def test_missing_partition_record(self):
        records = report().records()[:2]
        with self.assertRaises(EvaluationError):
            EvalReport.from_records(records)


class RenderingTests(SimpleTestCase):
    def test_report_layout(self):
        text = render_report(aggregate(load_reports(PUBLISHED_AVG)))
        for label in ("V1 only", "Sel(io)", "Oracle", "Change", "Triv-unch", "Average"):
            self.assertIn(label, text)
        self.assertIn("53.8", text)
        self.assertIn("closing 86% of the gap", text)

    def test_rendering_is_idempotent(self):
        summary = aggregate(load_reports(PUBLISHED))
        self.assertEqual(render_report(summary), render_report(summary))


class ConflictCurveTests(SimpleTestCase):
    def fake_bundle(self, size, seed):
        changed = [make_example(i, Partition.CHANGED, TRAFFIC) for i in range(4)]
        stale = [e.with_labels(v1_label=e.v2_label, partition=None) for e in changed[:2]]
        kept = [
            make_example(i, Partition.UNCHANGED, TRAFFIC).with_labels(id=f"v1-{i}", partition=None)
            for i in range(3)
        ]
        kept = [e.with_labels(v1_label=e.v2_label) for e in kept]
        tags = {e.id: Partition.CHANGED for e in stale} | {e.id: Partition.UNCHANGED for e in kept}
        return SplitBundle(
            spec=default_updates()["D"],
            seed=seed,
            v1_train=tuple(stale + kept),
            v2_train=tuple(changed[2:2 + size]),
            test_changed=(),
            test_unchanged=(),
            test_triv=(),
            oracle_tags=tags,
        )

    def test_training_data_per_condition(self):
        bundle = self.fake_bundle(2, 0)
        conflicting = curve_training_data(bundle, CurveCondition.CONFLICTING)
        removed = curve_training_data(bundle, "oracle_removed")
        self.assertEqual(len(conflicting), 7)
        self.assertEqual(len(removed), 5)
        v2_ids = {e.id for e in bundle.v2_train}
        self.assertEqual(
            {i.example.id for i in conflicting} & v2_ids, {i.example.id for i in removed} & v2_ids
        )

    def test_table_shape(self):
        calls = []

        def score(bundle, data, seed):
            calls.append((len(bundle.v2_train), seed, len(data)))
            return len(data) / 10

        points = conflict_curve(self.fake_bundle, sizes=[1, 2], seeds=[0, 1], score=score)
        self.assertEqual(len(points), 8)
        self.assertEqual(len(calls), 8)
        table = curve_table(points)
        self.assertEqual(list(table.columns), ["conflicting", "oracle_removed"])
        self.assertEqual(list(table.index), [("D", 1), ("D", 2), ("Average", 1), ("Average", 2)])
        self.assertAlmostEqual(table.loc[("Average", 2), "conflicting"], 0.7)
        self.assertIn("oracle removed", render_curve(table))

    def test_default_sizes_fix_fifty_conflicting(self):
        self.assertEqual(curve_sizes(25), SplitSizes(v2_changed=25, v2_unchanged=0, v1_changed=50))
