import math
import tempfile
from collections import defaultdict
from pathlib import Path

import torch
from django.test import SimpleTestCase, tag
from pydantic import ValidationError

from core_apps.dataset import generate_toy_corpus
from core_apps.parsetree import Action, ActionKind, delinearize, exact_match

from . import (
    ActionVocabulary,
    DuplicateHead,
    EmptyData,
    MaskedExample,
    ParserConfig,
    ParserError,
    Prediction,
    UnknownHead,
    Vocabulary,
    build_parser,
    encode_batch,
    load_checkpoint,
    loss,
    masked_cross_entropy,
    predict,
    predict_batch,
    save_checkpoint,
    train,
    train_routed,
)

TINY = ParserConfig(
    encoder_layers=1,
    encoder_heads=2,
    encoder_ff_dim=64,
    model_dim=32,
    decoder_heads=2,
    decoder_ff_dim=64,
    dropout=0.0,
    batch_size=16,
    train_steps=20,
    warmup_steps=5,
    learning_rate=1e-3,
)


def toy_setup(size=200, seed=0, config=TINY, heads=("main",)):
    corpus = generate_toy_corpus(seed=seed, size=size)
    model = build_parser(
        config,
        Vocabulary.build(example.query_tokens for example in corpus),
        ActionVocabulary.build(example.v2_label for example in corpus),
        heads=heads,
        seed=seed,
    )
    data = [MaskedExample.full(example, example.v2_label) for example in corpus]
    return corpus, model, data


def parameters_of(module):
    return {name: value.detach().clone() for name, value in module.state_dict().items()}


class ParserConfigTests(SimpleTestCase):
    def test_full_scale_defaults(self):
        config = ParserConfig()
        self.assertEqual(
            (config.model_dim, config.decoder_layers, config.decoder_ff_dim, config.batch_size), (256, 1, 256, 512)
        )
        self.assertEqual((config.train_steps, config.warmup_steps, config.learning_rate), (50_000, 10_000, 3e-4))
        self.assertEqual(config.decoder_heads, 2)

    def test_desk_scale(self):
        desk = ParserConfig().desk_scale()
        self.assertEqual((desk.train_steps, desk.batch_size, desk.warmup_steps), (5000, 64, 500))
        self.assertEqual(desk.model_dim, 256)

    def test_rejects_bad_values(self):
        with self.assertRaises(ValidationError):
            ParserConfig(train_steps=10, warmup_steps=20)
        with self.assertRaises(ValidationError):
            ParserConfig(model_dim=30, encoder_heads=4)
        with self.assertRaises(ValidationError):
            ParserConfig(batch_size=0)


class VocabularyTests(SimpleTestCase):
    def test_action_ids(self):
        vocab = ActionVocabulary(["IN:B", "SL:A", "IN:B"])
        self.assertEqual(len(vocab), 3)
        corpus = generate_toy_corpus(seed=0, size=20)
        vocab = ActionVocabulary.build(example.v2_label for example in corpus)
        for example in corpus:
            actions = MaskedExample.full(example, example.v2_label).actions
            self.assertEqual(tuple(vocab.action(vocab.target_id(action)) for action in actions), actions)
        with self.assertRaises(ParserError):
            vocab.target_id(Action.open("IN:NEVER_SEEN"))

    def test_unknown_token(self):
        vocab = Vocabulary(["boston"])
        self.assertEqual(vocab.encode(["boston", "paris"]), [2, 1])


class LossTests(SimpleTestCase):
    def setUp(self):
        self.corpus, self.model, self.data = toy_setup()

    def same_length_batch(self, count=8):
        by_length = defaultdict(list)
        for item in self.data:
            by_length[len(item.example.query_tokens)].append(item)
        return max(by_length.values(), key=len)[:count]

    def test_zeroed_head_gives_log_vocabulary(self):
        batch = self.same_length_batch()
        with torch.no_grad():
            for parameter in self.model.heads["main"].parameters():
                parameter.zero_()
        n_choices = len(self.model.action_vocab) + len(batch[0].example.query_tokens)
        value = loss(self.model, batch).item()
        self.assertLess(abs(value - math.log(n_choices)) / math.log(n_choices), 0.05)

    def test_masked_positions_do_not_matter(self):
        item = next(d for d in self.data if len(d.target.children) >= 1 and not d.target.children[0].children)
        slot = item.target.children[0]
        other = "SL:SOURCE" if slot.label != "SL:SOURCE" else "SL:DESTINATION"
        perturbed = item.target.with_children((slot.relabel(other),) + item.target.children[1:])
        first = loss(self.model, [MaskedExample.intent_only(item.example, item.target)]).item()
        second = loss(self.model, [MaskedExample.intent_only(item.example, perturbed)]).item()
        self.assertEqual(first, second)

    def test_gradient_is_zero_at_masked_positions(self):
        batch = [MaskedExample.intent_only(item.example, item.target) for item in self.data[:4]]
        encoded = encode_batch(self.model, batch)
        logits = self.model(encoded, "main")
        logits.retain_grad()
        masked_cross_entropy(logits, encoded.targets).backward()
        self.assertTrue(torch.count_nonzero(logits.grad[:, 1:]) == 0)
        self.assertTrue(torch.count_nonzero(logits.grad[:, 0]) > 0)

    def test_all_false_masks_give_no_head_gradient(self):
        item = self.data[0]
        blank = MaskedExample(item.example, item.target, (False,) * len(item.actions))
        value = loss(self.model, [blank])
        value.backward()
        self.assertEqual(value.item(), 0.0)
        for parameter in self.model.heads["main"].parameters():
            self.assertTrue(parameter.grad is None or torch.count_nonzero(parameter.grad) == 0)

    def test_mask_length_checked(self):
        item = self.data[0]
        with self.assertRaises(ParserError):
            MaskedExample(item.example, item.target, (True,))

    def test_batch_order_invariance(self):
        batch = self.data[:12]
        forward = loss(self.model, batch).item()
        backward = loss(self.model, list(reversed(batch))).item()
        self.assertAlmostEqual(forward, backward, delta=1e-6)

    def test_central_differences(self):
        model = self.model.double()
        batch = self.data[:2]
        value = loss(model, batch)
        value.backward()
        watched = [
            model.heads["main"].vocab.weight,
            model.heads["main"].copy_query.weight,
            model.token_embedding.weight,
            model.copy_input.weight,
        ]
        generator = torch.Generator().manual_seed(0)
        analytic, numeric = [], []
        eps = 1e-6
        for parameter in watched:
            flat = parameter.data.view(-1)
            grad = parameter.grad.view(-1)
            nonzero = torch.nonzero(grad).view(-1)
            picks = nonzero[torch.randperm(len(nonzero), generator=generator)[:5]]
            for index in picks.tolist():
                original = flat[index].item()
                flat[index] = original + eps
                upper = loss(model, batch).item()
                flat[index] = original - eps
                lower = loss(model, batch).item()
                flat[index] = original
                analytic.append(grad[index].item())
                numeric.append((upper - lower) / (2 * eps))
        analytic = torch.tensor(analytic, dtype=torch.float64)
        numeric = torch.tensor(numeric, dtype=torch.float64)
        self.assertLessEqual((analytic - numeric).norm() / analytic.norm(), 1e-4)


class HeadTests(SimpleTestCase):
    def setUp(self):
        self.corpus, self.model, self.data = toy_setup(heads=("v1", "v2"))

    def test_step_on_one_head_leaves_the_other_untouched(self):
        before = parameters_of(self.model)
        train_routed(self.model, {"v1": self.data}, TINY, seed=0, steps=1)
        after = parameters_of(self.model)
        for name, value in before.items():
            if name.startswith("heads.v2."):
                self.assertTrue(torch.equal(value, after[name]), name)
        self.assertFalse(torch.equal(before["heads.v1.vocab.weight"], after["heads.v1.vocab.weight"]))
        self.assertFalse(torch.equal(before["token_embedding.weight"], after["token_embedding.weight"]))

    def test_no_gradient_reaches_other_head(self):
        loss(self.model, self.data[:4], "v1").backward()
        for parameter in self.model.heads["v2"].parameters():
            self.assertIsNone(parameter.grad)

    def test_add_head_keeps_existing_losses(self):
        batch = self.data[:6]
        before = loss(self.model, batch, "v1").item()
        self.model.add_head("fresh")
        self.assertEqual(loss(self.model, batch, "v1").item(), before)
        self.assertIn("fresh", self.model.head_names)

    def test_cloned_head_predicts_like_its_source(self):
        self.model.add_head("copy", clone_of="v1")
        queries = [example.query_tokens for example in self.corpus[:10]]
        self.assertEqual(predict_batch(self.model, queries, "copy"), predict_batch(self.model, queries, "v1"))

    def test_duplicate_and_unknown_heads(self):
        with self.assertRaises(DuplicateHead):
            self.model.add_head("v1")
        with self.assertRaises(UnknownHead):
            self.model.add_head("x", clone_of="missing")
        with self.assertRaises(UnknownHead):
            loss(self.model, self.data[:1], "main")


class CloneTests(SimpleTestCase):
    def setUp(self):
        self.corpus, self.model, self.data = toy_setup()
        self.queries = [example.query_tokens for example in self.corpus[:10]]

    def test_clone_is_independent(self):
        reference = predict_batch(self.model, self.queries)
        twin = self.model.clone()
        self.assertEqual(predict_batch(twin, self.queries), reference)
        with torch.no_grad():
            for parameter in twin.parameters():
                parameter.add_(1.0)
        self.assertEqual(predict_batch(self.model, self.queries), reference)

    def test_zero_steps_is_identity(self):
        twin = train(self.model.clone(), self.data, TINY, steps=0)
        for name, value in parameters_of(self.model).items():
            self.assertTrue(torch.equal(value, twin.state_dict()[name]))

    def test_empty_data(self):
        with self.assertRaises(EmptyData):
            train(self.model, [], TINY)
        with self.assertRaises(EmptyData):
            train_routed(self.model, {}, TINY)


class TrainingDeterminismTests(SimpleTestCase):
    def test_equal_seeds_equal_parameters(self):
        _, first, data = toy_setup()
        _, second, _ = toy_setup()
        train(first, data, TINY, seed=11, steps=5)
        train(second, data, TINY, seed=11, steps=5)
        for name, value in parameters_of(first).items():
            self.assertTrue(torch.equal(value, second.state_dict()[name]), name)


class DecodeTests(SimpleTestCase):
    def setUp(self):
        self.corpus, self.model, self.data = toy_setup()

    def test_untrained_decodes_are_bounded_and_flagged(self):
        for example in self.corpus[:40]:
            prediction = predict(self.model, example.query_tokens)
            n = len(example.query_tokens)
            self.assertLessEqual(len(prediction.actions), 2 * n + 64)
            for action in prediction.actions:
                if action.kind is ActionKind.COPY:
                    self.assertLess(action.index, n)
            if prediction.valid:
                self.assertEqual(prediction.tree, delinearize(prediction.actions, example.query_tokens))

    def test_greedy_decode_is_deterministic(self):
        queries = [example.query_tokens for example in self.corpus[:16]]
        self.assertEqual(predict_batch(self.model, queries), predict_batch(self.model, queries))

    def test_overlong_query_is_scored_invalid(self):
        overlong = ["traffic"] * (TINY.max_query_tokens + 1)
        queries = [self.corpus[0].query_tokens, overlong, self.corpus[1].query_tokens]
        predictions = predict_batch(self.model, queries)
        self.assertEqual(predictions[1], Prediction(None, False, ()))
        self.assertEqual([predictions[0], predictions[2]], predict_batch(self.model, [queries[0], queries[2]]))

    def test_checkpoint_round_trip(self):
        train(self.model, self.data, TINY, seed=1, steps=3)
        with tempfile.TemporaryDirectory() as tmp:
            restored = load_checkpoint(save_checkpoint(self.model, Path(tmp) / "parser.pt"))
        queries = [example.query_tokens for example in self.corpus[:16]]
        self.assertEqual(predict_batch(restored, queries), predict_batch(self.model, queries))
        self.assertEqual(restored.head_names, self.model.head_names)


@tag("slow")
class OverfitTests(SimpleTestCase):
    config = ParserConfig(
        encoder_layers=2,
        model_dim=64,
        encoder_ff_dim=128,
        decoder_ff_dim=128,
        dropout=0.0,
        batch_size=32,
        train_steps=2000,
        warmup_steps=100,
        learning_rate=1e-3,
    )

    def test_single_example(self):
        corpus, model, data = toy_setup(size=1, config=self.config)
        train(model, data, self.config, seed=0, steps=300)
        prediction = predict(model, corpus[0].query_tokens)
        self.assertTrue(prediction.valid)
        self.assertTrue(exact_match(prediction.tree, corpus[0].v2_label))

    def test_hundred_examples(self):
        corpus, model, data = toy_setup(size=100, config=self.config)
        train(model, data, self.config, seed=0)
        predictions = predict_batch(model, [example.query_tokens for example in corpus])
        hits = sum(p.valid and exact_match(p.tree, e.v2_label) for p, e in zip(predictions, corpus))
        self.assertGreaterEqual(hits / len(corpus), 0.95)
