import torch
from django.test import SimpleTestCase, tag

from core_apps.dataset import (
    Partition,
    SplitSizes,
    build_version_pair,
    default_updates,
    generate_toy_corpus,
    sample_splits,
)
from core_apps.parser import (
    MAIN_HEAD,
    ActionVocabulary,
    ClassifierConfig,
    MaskedExample,
    ParserConfig,
    Vocabulary,
    build_parser,
    train,
)
from core_apps.parsetree import exact_match

from . import (
    V1_HEAD,
    V1_PARSER_STAGE,
    V2_HEAD,
    MissingClassifier,
    MultipleNewIntents,
    SingleClassData,
    Strategy,
    build_training_plan,
    classifier_accuracy,
    filter_v1,
    intent_only_relabel,
    train_selection_classifier,
    upsample_factor,
)

CONFIG = ParserConfig(
    encoder_layers=1,
    model_dim=32,
    encoder_ff_dim=64,
    decoder_ff_dim=64,
    dropout=0.0,
    batch_size=32,
    train_steps=400,
    warmup_steps=40,
    learning_rate=1e-3,
)


class TagLookup:
    """Classifier stand-in answering from a fixed query -> changed table."""

    def __init__(self, table, default=False):
        self.table = table
        self.default = default

    def predict_changed(self, queries):
        return [self.table.get(tuple(query), self.default) for query in queries]


def perfect_classifier(bundle):
    return TagLookup({e.query_tokens: bundle.oracle_tags[e.id] is Partition.CHANGED for e in bundle.v1_train})


def bundle_for(key, sizes=None, seed=0, corpus_size=3000):
    data = build_version_pair(generate_toy_corpus(seed=0, size=corpus_size), default_updates()[key])
    return sample_splits(data, sizes or SplitSizes(), seed=seed)


def ids(items):
    return {item.example.id for item in items}


class TrainingPlanTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.bundle = bundle_for("D")
        cls.triv_ids = {e.id for e in cls.bundle.v1_trivially_unchanged()}
        cls.affected_ids = {e.id for e in cls.bundle.v1_affected()}

    def plan(self, strategy, classifier=None, bundle=None):
        return build_training_plan(strategy, bundle or self.bundle, CONFIG, classifier=classifier)

    def test_every_strategy_has_a_recipe(self):
        for strategy in Strategy:
            plan = self.plan(strategy, classifier=perfect_classifier(self.bundle))
            self.assertIs(plan.strategy, strategy)
            self.assertTrue(plan.stages)
            self.assertIn(plan.eval_head, plan.heads)

    def test_v1_only(self):
        plan = self.plan("v1_only")
        self.assertEqual(ids(plan.examples()), {e.id for e in self.bundle.v1_train})
        self.assertEqual(plan.stages[0].name, V1_PARSER_STAGE)

    def test_v2_only_includes_trivially_unchanged(self):
        plan = self.plan(Strategy.V2_ONLY)
        self.assertEqual(ids(plan.examples()), {e.id for e in self.bundle.v2_train} | self.triv_ids)

    def test_direct_mix_is_the_union(self):
        plan = self.plan(Strategy.DIRECT_MIX)
        self.assertEqual(len(plan.examples()), len(self.bundle.v1_train) + len(self.bundle.v2_train))

    def test_upsampling_ratio(self):
        bundle = bundle_for("D", SplitSizes(v2_changed=25, v2_unchanged=0, v1_changed=50))
        self.assertEqual(upsample_factor(bundle), 2)
        plan = self.plan(Strategy.UPSAMPLED_MIX, bundle=bundle)
        self.assertEqual(len(plan.examples()), len(bundle.v1_train) + 2 * len(bundle.v2_train))

    def test_fine_tune_stages(self):
        plan = self.plan(Strategy.FINE_TUNE)
        first, second = plan.stages
        self.assertEqual(first, self.plan(Strategy.V1_ONLY).stages[0])
        self.assertEqual(second.steps, 80)
        self.assertEqual(second.warmup_steps, 8)
        self.assertEqual(ids(second.routed[MAIN_HEAD]), ids(self.plan(Strategy.V2_ONLY).examples()))

    def test_multi_task_routing(self):
        plan = self.plan(Strategy.MULTI_TASK)
        self.assertEqual(plan.heads, (V1_HEAD, V2_HEAD))
        self.assertEqual(plan.eval_head, V2_HEAD)
        v2_train_ids = {e.id for e in self.bundle.v2_train}
        self.assertFalse(ids(plan.examples(V1_HEAD)) & v2_train_ids)
        self.assertFalse(ids(plan.examples(V2_HEAD)) & self.affected_ids)
        self.assertEqual(ids(plan.examples(V2_HEAD)), v2_train_ids | self.triv_ids)

    def test_select_remove_with_perfect_classifier(self):
        plan = self.plan(Strategy.SELECT_REMOVE, classifier=perfect_classifier(self.bundle))
        included = ids(plan.examples())
        for example_id, partition in self.bundle.oracle_tags.items():
            self.assertEqual(example_id in included, partition is not Partition.CHANGED, example_id)

    def test_select_intent_only_with_perfect_classifier(self):
        plan = self.plan(Strategy.SELECT_INTENT_ONLY, classifier=perfect_classifier(self.bundle))
        masked = [item for item in plan.examples() if not all(item.loss_mask)]
        self.assertEqual(len(masked), self.bundle.conflicting_count())
        for item in masked:
            self.assertEqual(item.target.label, "IN:GET_INFO_TRAFFIC")
            self.assertEqual(item.loss_mask[0], True)
            self.assertFalse(any(item.loss_mask[1:]))

    def test_constant_classifiers(self):
        affected = self.bundle.v1_affected()
        kept, flagged = filter_v1(TagLookup({}, default=False), affected)
        self.assertEqual((len(kept), len(flagged)), (len(affected), 0))
        kept, flagged = filter_v1(TagLookup({}, default=True), affected)
        self.assertEqual((len(kept), len(flagged)), (0, len(affected)))

    def test_filter_is_a_partition(self):
        affected = self.bundle.v1_affected()
        kept, flagged = filter_v1(perfect_classifier(self.bundle), affected)
        self.assertEqual(len(kept) + len(flagged), len(affected))
        self.assertEqual({e.id for e in flagged}, {i for i, p in self.bundle.oracle_tags.items() if p is Partition.CHANGED})

    def test_missing_classifier(self):
        for strategy in (Strategy.SELECT_REMOVE, Strategy.SELECT_INTENT_ONLY):
            with self.assertRaises(MissingClassifier):
                self.plan(strategy)

    def test_no_contradicting_supervision(self):
        for strategy in (Strategy.V2_ONLY, Strategy.ORACLE, Strategy.SELECT_REMOVE):
            plan = self.plan(strategy, classifier=perfect_classifier(self.bundle))
            for item in plan.examples():
                self.assertTrue(exact_match(item.target, item.example.v2_label), (strategy, item.example.id))
        for item in self.plan(Strategy.MULTI_TASK).examples(V2_HEAD):
            self.assertTrue(exact_match(item.target, item.example.v2_label))

    def test_oracle_ignores_classifier(self):
        self.assertEqual(
            self.plan(Strategy.ORACLE), self.plan(Strategy.ORACLE, classifier=TagLookup({}, default=True))
        )


class IntentOnlyRelabelTests(SimpleTestCase):
    def test_new_intent_from_unsupported(self):
        bundle = bundle_for("A")
        flagged = [e for e in bundle.v1_train if bundle.oracle_tags[e.id] is Partition.CHANGED]
        for item in intent_only_relabel(flagged, bundle.spec):
            self.assertEqual(item.example.v1_label.label, "IN:UNSUPPORTED_NAVIGATION")
            self.assertEqual(item.target.label, "IN:GET_ESTIMATED_ARRIVAL")
            self.assertEqual(item.loss_mask, (True, False))

    def test_argument_only_update_keeps_intent(self):
        bundle = bundle_for("C")
        flagged = [e for e in bundle.v1_train if bundle.oracle_tags[e.id] is Partition.CHANGED][:20]
        for item in intent_only_relabel(flagged, bundle.spec):
            self.assertEqual(item.target, item.example.v1_label)
            self.assertEqual(item.loss_mask.count(True), 1)
            self.assertTrue(item.loss_mask[0])

    def test_two_new_intents(self):
        bundle = bundle_for("E")
        with self.assertRaises(MultipleNewIntents):
            intent_only_relabel(bundle.v1_affected()[:3], bundle.spec)

    def test_strategy_falls_back_and_says_so(self):
        bundle = bundle_for("E")
        plan = build_training_plan(Strategy.SELECT_INTENT_ONLY, bundle, CONFIG, classifier=perfect_classifier(bundle))
        self.assertTrue(any("fell back to select_remove" in note for note in plan.notes))
        self.assertTrue(all(all(item.loss_mask) for item in plan.examples()))
        removed = build_training_plan(Strategy.SELECT_REMOVE, bundle, CONFIG, classifier=perfect_classifier(bundle))
        self.assertEqual(ids(plan.examples()), ids(removed.examples()))


def v1_parser_for(bundle, steps):
    examples = list(bundle.v1_train) + list(bundle.v2_train)
    model = build_parser(
        CONFIG,
        Vocabulary.build(example.query_tokens for example in examples),
        ActionVocabulary.build([e.v1_label for e in bundle.v1_train] + [e.v2_label for e in bundle.v2_train]),
    )
    data = [MaskedExample.full(example, example.v1_label) for example in bundle.v1_train]
    return train(model, data, CONFIG, seed=0, steps=steps)


class SelectionClassifierTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.bundle = bundle_for("D", corpus_size=2000)
        cls.parser = v1_parser_for(cls.bundle, steps=0)

    def test_single_class(self):
        unchanged = [e for e in self.bundle.v2_train if e.partition is Partition.UNCHANGED]
        with self.assertRaises(SingleClassData):
            train_selection_classifier(unchanged, self.parser, ClassifierConfig(train_steps=1), seed=0)

    def test_deterministic_and_leaves_parser_alone(self):
        before = {name: value.clone() for name, value in self.parser.state_dict().items()}
        config = ClassifierConfig(train_steps=5, hidden_dim=16)
        first = train_selection_classifier(self.bundle.v2_train, self.parser, config, seed=3)
        second = train_selection_classifier(self.bundle.v2_train, self.parser, config, seed=3)
        queries = [e.query_tokens for e in self.bundle.test_changed]
        self.assertTrue(torch.equal(first.changed_probability(queries), second.changed_probability(queries)))
        for name, value in self.parser.state_dict().items():
            self.assertTrue(torch.equal(value, before[name]), name)


class SelectionClassifierQualityChecks:
    update = None
    corpus_size = 2000

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.bundle = bundle_for(cls.update, corpus_size=cls.corpus_size)
        cls.parser = v1_parser_for(cls.bundle, steps=CONFIG.train_steps)
        cls.held_out = list(cls.bundle.test_changed) + list(cls.bundle.test_unchanged)

    def test_held_out_accuracy(self):
        classifier = train_selection_classifier(self.bundle.v2_train, self.parser, ClassifierConfig(), seed=0)
        self.assertGreaterEqual(classifier_accuracy(classifier, self.held_out), 0.9)

    def test_flipped_labels_flip_decisions(self):
        flip = {Partition.CHANGED: Partition.UNCHANGED, Partition.UNCHANGED: Partition.CHANGED}
        flipped = [e.with_labels(partition=flip[e.partition]) for e in self.bundle.v2_train]
        original = train_selection_classifier(self.bundle.v2_train, self.parser, ClassifierConfig(), seed=0)
        inverted = train_selection_classifier(flipped, self.parser, ClassifierConfig(), seed=0)
        accuracy = classifier_accuracy(original, self.held_out)
        self.assertAlmostEqual(classifier_accuracy(inverted, self.held_out), 1 - accuracy, delta=0.1)


@tag("slow")
class MergedIntentSelectionQualityTests(SelectionClassifierQualityChecks, SimpleTestCase):
    update = "D"


@tag("slow")
class UnsupportedIntentSelectionQualityTests(SelectionClassifierQualityChecks, SimpleTestCase):
    update = "A"
    corpus_size = 6000
