import os
import tempfile
from collections import Counter
from pathlib import Path
from unittest import skipUnless

from django.test import SimpleTestCase

from core_apps.parsetree import exact_match, parse_bracketed, serialize

from . import (
    PUBLISHED_PARTITION_SIZES,
    AmbiguousRules,
    CorpusParseError,
    DegenerateGrammar,
    Example,
    GrammarConfig,
    InsufficientPartition,
    MergeIntent,
    MissingV2Label,
    Partition,
    RemoveArgument,
    SplitSizes,
    UpdateSpec,
    apply_reverse_update,
    build_version_pair,
    classify_partition,
    default_grammar,
    default_updates,
    generate_toy_corpus,
    load_corpus,
    load_top_tsv,
    load_update_specs,
    load_versioned,
    sample_splits,
    save_corpus,
    save_versioned,
)

CHANGED, UNCHANGED, TRIV = Partition.CHANGED, Partition.UNCHANGED, Partition.TRIVIALLY_UNCHANGED

# (query, V1 label, V2 label) rows from the update illustrations.
EXAMPLE_ROWS = [
    (
        "Where is there construction on the highway ?",
        '(IN:GET_INFO_ROAD_CONDITION (SL:LOCATION "the highway" ) )',
        '(IN:GET_INFO_TRAFFIC (SL:LOCATION "the highway" ) )',
    ),
    (
        "Are roads icy ?",
        '(IN:GET_INFO_ROAD_CONDITION (SL:ROAD_CONDITION "icy" ) )',
        '(IN:GET_INFO_ROAD_CONDITION (SL:ROAD_CONDITION "icy" ) )',
    ),
    (
        "If I leave right now , can I get to New York City before one o'clock PM ?",
        "(IN:UNSUPPORTED_NAVIGATION )",
        '(IN:GET_ESTIMATED_ARRIVAL (SL:DATE_TIME_DEPARTURE "right now" ) (SL:DESTINATION "New York City" ) )',
    ),
    (
        "What major city has the worst traffic ?",
        "(IN:UNSUPPORTED_NAVIGATION )",
        "(IN:UNSUPPORTED_NAVIGATION )",
    ),
    (
        "Which route to work has less traffic ?",
        '(IN:GET_DIRECTIONS (SL:DESTINATION "work" ) )',
        '(IN:GET_DIRECTIONS (SL:DESTINATION "work" ) (SL:OBSTRUCTION "traffic" ) )',
    ),
    (
        "What is the best route to get to Atlanta to see my brother Mark ?",
        '(IN:GET_DIRECTIONS (SL:DESTINATION "Atlanta" ) )',
        '(IN:GET_DIRECTIONS (SL:DESTINATION "Atlanta" ) )',
    ),
]


def example_row(index):
    query, v1, v2 = EXAMPLE_ROWS[index]
    tokens = tuple(query.split())
    return tokens, parse_bracketed(v1, tokens), parse_bracketed(v2, tokens)


def oracle_partition(key, provenance):
    """Expected partition of a generated example, read from what the generator recorded."""
    intent = provenance["intent"]
    if key == "A":
        table = {"IN:GET_ESTIMATED_ARRIVAL": CHANGED, "IN:UNSUPPORTED_NAVIGATION": UNCHANGED}
    elif key == "B":
        table = {"IN:GET_ESTIMATED_DEPARTURE": CHANGED, "IN:GET_ESTIMATED_ARRIVAL": UNCHANGED}
    elif key == "C":
        if intent in ("IN:GET_DIRECTIONS", "IN:GET_ESTIMATED_DURATION"):
            return CHANGED if "SL:OBSTRUCTION" in provenance["slots"] else UNCHANGED
        return TRIV
    elif key == "D":
        table = {"IN:GET_INFO_TRAFFIC": CHANGED, "IN:GET_INFO_ROAD_CONDITION": UNCHANGED}
    else:
        table = {
            "IN:GET_DISTANCE": CHANGED,
            "IN:GET_INFO_ROUTE": CHANGED,
            "IN:GET_ESTIMATED_DURATION": UNCHANGED,
            "IN:UNSUPPORTED_NAVIGATION": UNCHANGED,
        }
    return table.get(intent, TRIV)


class ClassifyPartitionTests(SimpleTestCase):
    affected = {"IN:GET_INFO_ROAD_CONDITION", "IN:GET_INFO_TRAFFIC"}

    def test_construction_on_the_highway_is_changed(self):
        _, v1, v2 = example_row(0)
        self.assertIs(classify_partition(v1, v2, self.affected), CHANGED)

    def test_are_roads_icy_is_unchanged(self):
        _, v1, v2 = example_row(1)
        self.assertIs(classify_partition(v1, v2, self.affected), UNCHANGED)

    def test_outside_affected_is_trivially_unchanged_without_v2(self):
        _, v1, _ = example_row(4)
        self.assertIs(classify_partition(v1, None, self.affected), TRIV)

    def test_affected_without_v2_label(self):
        _, v1, _ = example_row(0)
        with self.assertRaises(MissingV2Label):
            classify_partition(v1, None, self.affected)


class ApplyReverseUpdateTests(SimpleTestCase):
    def setUp(self):
        self.updates = default_updates()

    def test_unsupported_merge_drops_arguments(self):
        tokens, v1, v2 = example_row(2)
        self.assertEqual(serialize(apply_reverse_update(v2, self.updates["A"]), tokens), "(IN:UNSUPPORTED_NAVIGATION )")
        self.assertTrue(exact_match(apply_reverse_update(v2, self.updates["A"]), v1))

    def test_remove_argument(self):
        tokens, v1, v2 = example_row(4)
        example = Example(id="fig-4", query_tokens=tokens, v2_label=v2)
        self.assertEqual(apply_reverse_update(example, self.updates["C"]), v1)

    def test_related_merge_keeps_arguments(self):
        _, v1, v2 = example_row(0)
        self.assertEqual(apply_reverse_update(v2, self.updates["D"]), v1)

    def test_rename_policy_relabels_slots(self):
        tokens = tuple("when should i leave to get to boston by 5 pm".split())
        v2 = parse_bracketed(
            '(IN:GET_ESTIMATED_DEPARTURE (SL:DESTINATION "boston" ) (SL:DATE_TIME_ARRIVAL "by 5 pm" ) )', tokens
        )
        v1 = apply_reverse_update(v2, self.updates["B"])
        self.assertEqual(
            serialize(v1, tokens),
            '(IN:GET_ESTIMATED_ARRIVAL (SL:DESTINATION "boston" ) (SL:DATE_TIME_DEPARTURE "by 5 pm" ) )',
        )

    def test_selector_on_arguments(self):
        tokens = tuple("is this the fastest way to boston".split())
        route = parse_bracketed("(IN:GET_INFO_ROUTE )", tokens)
        self.assertEqual(apply_reverse_update(route, self.updates["E"]).label, "IN:UNSUPPORTED_NAVIGATION")

    def test_no_rule_is_identity(self):
        _, _, v2 = example_row(5)
        self.assertTrue(exact_match(apply_reverse_update(v2, self.updates["A"]), v2))

    def test_drop_all_is_idempotent(self):
        _, _, v2 = example_row(2)
        once = apply_reverse_update(v2, self.updates["A"])
        self.assertEqual(apply_reverse_update(once, self.updates["A"]), once)

    def test_two_rules_firing(self):
        spec = UpdateSpec(
            name="ambiguous",
            affected_intents=["IN:GET_INFO_ROAD_CONDITION", "IN:UNSUPPORTED_NAVIGATION"],
            rules=[
                MergeIntent(new_intent="IN:GET_INFO_TRAFFIC", merged_into="IN:GET_INFO_ROAD_CONDITION"),
                MergeIntent(new_intent="IN:GET_INFO_TRAFFIC", merged_into="IN:UNSUPPORTED_NAVIGATION"),
            ],
        )
        _, _, v2 = example_row(0)
        with self.assertRaises(AmbiguousRules):
            apply_reverse_update(v2, spec)

    def test_rule_outside_affected_rejected(self):
        with self.assertRaises(ValueError):
            UpdateSpec(
                name="bad",
                affected_intents=["IN:GET_EVENT"],
                rules=[RemoveArgument(intent_set=["IN:GET_DIRECTIONS"], slot_label="SL:OBSTRUCTION")],
            )


class UpdateSpecFileTests(SimpleTestCase):
    def test_five_updates(self):
        updates = default_updates()
        self.assertEqual(sorted(updates), ["A", "B", "C", "D", "E"])
        self.assertEqual(updates["E"].new_intents, ["IN:GET_DISTANCE", "IN:GET_INFO_ROUTE"])
        self.assertEqual(updates["C"].new_intents, [])

    def test_grammar_covers_every_update(self):
        for spec in default_updates().values():
            default_grammar().check_intents(spec.intents())


class BuildVersionPairTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.corpus = generate_toy_corpus(seed=3, size=1000)

    def test_partitions_match_generator_record(self):
        for key, spec in default_updates().items():
            data = build_version_pair(self.corpus, spec)
            expected = Counter(oracle_partition(key, example.provenance) for example in self.corpus)
            self.assertEqual(Counter(example.partition for example in data.examples), expected, key)
            for example in data.examples:
                self.assertEqual(example.partition, oracle_partition(key, example.provenance), (key, example.id))

    def test_changed_means_labels_differ(self):
        for spec in default_updates().values():
            for example in build_version_pair(self.corpus, spec).examples:
                if example.partition is CHANGED:
                    self.assertFalse(exact_match(example.v1_label, example.v2_label))
                elif example.partition is UNCHANGED:
                    self.assertTrue(exact_match(example.v1_label, example.v2_label))
                    self.assertIn(example.v1_label.label, spec.affected)

    def test_empty_rule_list_changes_nothing(self):
        spec = UpdateSpec(name="noop", affected_intents=["IN:GET_EVENT"])
        counts = build_version_pair(self.corpus, spec).counts()
        self.assertEqual(counts[CHANGED], 0)
        self.assertEqual(counts[UNCHANGED] + counts[TRIV], len(self.corpus))


class SampleSplitsTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.data = build_version_pair(generate_toy_corpus(seed=0, size=3000), default_updates()["D"])

    def ids(self, examples):
        return {example.id for example in examples}

    def test_standard_sizes(self):
        bundle = sample_splits(self.data, SplitSizes(), seed=1)
        self.assertEqual(len(bundle.v2_train), 100)
        for examples in bundle.test_sets().values():
            self.assertEqual(len(examples), 100)
        self.assertEqual(len(bundle.v1_train), len(self.data) - 400)

    def test_same_seed_same_ids(self):
        first = sample_splits(self.data, SplitSizes(), seed=7)
        second = sample_splits(self.data, SplitSizes(), seed=7)
        self.assertEqual(first.v1_train, second.v1_train)
        self.assertEqual(first.v2_train, second.v2_train)
        self.assertEqual(first.test_changed, second.test_changed)
        self.assertNotEqual(self.ids(first.v2_train), self.ids(sample_splits(self.data, SplitSizes(), seed=8).v2_train))

    def test_disjoint_by_id(self):
        bundle = sample_splits(self.data, SplitSizes(), seed=2)
        test_ids = set().union(*(self.ids(examples) for examples in bundle.test_sets().values()))
        self.assertFalse(self.ids(bundle.v2_train) & test_ids)
        self.assertFalse(self.ids(bundle.v1_train) & test_ids)
        self.assertFalse(self.ids(bundle.v1_train) & self.ids(bundle.v2_train))

    def test_changed_only_v2_train(self):
        bundle = sample_splits(self.data, SplitSizes(v2_changed=50, v2_unchanged=0), seed=4)
        self.assertEqual(len(bundle.v2_train), 50)
        self.assertTrue(all(example.partition is CHANGED for example in bundle.v2_train))

    def test_v1_side_hides_tags_and_keeps_stale_labels(self):
        bundle = sample_splits(self.data, SplitSizes(), seed=5)
        for example in bundle.v1_train:
            self.assertIsNone(example.partition)
            if bundle.oracle_tags[example.id] is CHANGED:
                self.assertFalse(exact_match(example.v1_label, example.v2_label))
        for example in bundle.v2_train + bundle.test_changed:
            self.assertIsNone(example.v1_label)

    def test_conflicting_cap(self):
        bundle = sample_splits(self.data, SplitSizes(v2_unchanged=0, v1_changed=50), seed=6)
        self.assertEqual(bundle.conflicting_count(), 50)

    def test_insufficient_partition(self):
        with self.assertRaises(InsufficientPartition) as ctx:
            sample_splits(self.data, SplitSizes(test_per_partition=5000), seed=0)
        self.assertEqual(ctx.exception.requested, 5050)


class GenerateToyCorpusTests(SimpleTestCase):
    def test_default_size_and_balance(self):
        corpus = generate_toy_corpus(seed=0)
        self.assertEqual(len(corpus), 6000)
        counts = Counter(example.provenance["intent"] for example in corpus)
        uniform = len(corpus) / len(default_grammar().intents)
        self.assertEqual(set(counts), set(default_grammar().intents))
        for intent, count in counts.items():
            self.assertTrue(0.5 * uniform <= count <= 1.5 * uniform, intent)

    def test_size_zero(self):
        self.assertEqual(generate_toy_corpus(seed=0, size=0), [])

    def test_deterministic(self):
        self.assertEqual(generate_toy_corpus(seed=9, size=200), generate_toy_corpus(seed=9, size=200))

    def test_seeds_differ(self):
        first = generate_toy_corpus(seed=1, size=2000)
        second = generate_toy_corpus(seed=2, size=2000)
        differing = sum(a.query != b.query for a, b in zip(first, second))
        self.assertGreaterEqual(differing / len(first), 0.99)

    def test_grammar_shape(self):
        grammar = default_grammar()
        self.assertGreaterEqual(len(grammar.intents), 8)
        self.assertGreaterEqual(len(grammar.slot_labels()), 10)

    def test_nested_home_subtree(self):
        corpus = generate_toy_corpus(seed=0, size=500)
        self.assertTrue(any("IN:GET_LOCATION_HOME" in example.v2_label.labels() for example in corpus))

    def test_intent_without_template(self):
        raw = default_grammar().model_dump()
        raw["intents"]["IN:GET_EVENT"]["templates"] = []
        with self.assertRaises(DegenerateGrammar) as ctx:
            generate_toy_corpus(GrammarConfig.model_validate(raw), seed=0, size=10)
        self.assertEqual(ctx.exception.intent, "IN:GET_EVENT")

    def test_update_naming_missing_intent(self):
        with self.assertRaises(DegenerateGrammar) as ctx:
            default_grammar().check_intents({"IN:GET_WEATHER"})
        self.assertEqual(ctx.exception.intent, "IN:GET_WEATHER")


class CorpusFileTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.root = Path(self.tmp.name)

    def test_round_trip(self):
        corpus = generate_toy_corpus(seed=5, size=300)
        loaded = load_corpus(save_corpus(corpus, self.root / "corpus.tsv"))
        self.assertEqual([example.id for example in loaded], [example.id for example in corpus])
        for before, after in zip(corpus, loaded):
            self.assertEqual(after.query_tokens, before.query_tokens)
            self.assertTrue(exact_match(after.v2_label, before.v2_label))

    def test_versioned_round_trip(self):
        data = build_version_pair(generate_toy_corpus(seed=5, size=300), default_updates()["C"])
        loaded = load_versioned(save_versioned(data, self.root / "C.tsv"), data.spec)
        self.assertEqual(loaded.examples, data.examples)

    def test_malformed_line_number(self):
        rows = [f"row-{i}\tWhich route to work has less traffic ?\t(IN:GET_DIRECTIONS )" for i in range(6)]
        rows.append('row-6\tWhich route to work ?\t(IN:GET_DIRECTIONS (SL:DESTINATION "work" )')
        path = self.root / "broken.tsv"
        path.write_text("\n".join(rows) + "\n")
        with self.assertRaises(CorpusParseError) as ctx:
            load_corpus(path)
        self.assertEqual(ctx.exception.line, 7)

    def test_example_rows_verbatim(self):
        path = self.root / "examples.tsv"
        lines = []
        for i, (query, v1, v2) in enumerate(EXAMPLE_ROWS):
            lines.append(f"fig-{i}v1\t{query}\t{v1}")
            lines.append(f"fig-{i}v2\t{query}\t{v2}")
        path.write_text("\n".join(lines) + "\n")
        loaded = load_corpus(path)
        self.assertEqual(len(loaded), 12)
        for example, line in zip(loaded, lines):
            self.assertEqual(example.render(example.v2_label), line.split("\t")[2])

    def test_top_format(self):
        path = self.root / "top.tsv"
        path.write_text(
            "How far is Boston\thow far is boston\t[IN:GET_DISTANCE how far is [SL:DESTINATION boston ] ]\n"
            "directions to mom's house\tdirections to mom 's house\t"
            "[IN:GET_DIRECTIONS directions to [SL:DESTINATION [IN:GET_LOCATION_HOME [SL:CONTACT mom ] 's house ] ] ]\n"
        )
        first, second = load_top_tsv(path)
        self.assertEqual(first.render(first.v2_label), '(IN:GET_DISTANCE (SL:DESTINATION "boston" ) )')
        self.assertEqual(
            second.render(second.v2_label),
            '(IN:GET_DIRECTIONS (SL:DESTINATION (IN:GET_LOCATION_HOME (SL:CONTACT "mom" ) ) ) )',
        )
        self.assertEqual(first.id, "top-000001")


@skipUnless(os.getenv("TOP_CORPUS") and os.getenv("TOP_UPDATES"), "real TOP corpus not supplied")
class TopPartitionSizeTests(SimpleTestCase):
    def test_reference_partition_sizes(self):
        corpus = load_top_tsv(os.environ["TOP_CORPUS"])
        for spec in load_update_specs(os.environ["TOP_UPDATES"]):
            counts = build_version_pair(corpus, spec).counts()
            self.assertEqual((counts[CHANGED], counts[UNCHANGED], counts[TRIV]), PUBLISHED_PARTITION_SIZES[spec.key])
