from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import torch
import torch.nn.functional as F
from loguru import logger

from core_apps.common.seeding import seed_everything
from core_apps.dataset import Example
from core_apps.parsetree import (
    ActionKind,
    ActionSequence,
    MalformedSequence,
    ParseTree,
    delinearize,
    linearize,
    salvage,
    truncate_at_root_close,
)

from .config import ParserConfig
from .exceptions import EmptyData, ParserError
from .network import MAIN_HEAD, EncodedBatch, ParserModel

IGNORE_INDEX = -100


@dataclass(frozen=True)
class MaskedExample:
    """A training target with a per-action loss mask (True = contributes to the loss)."""

    example: Example
    target: ParseTree
    loss_mask: tuple[bool, ...]

    def __post_init__(self):
        if len(self.loss_mask) != len(self.actions):
            raise ParserError(
                f"mask of {len(self.loss_mask)} positions for {len(self.actions)} actions on {self.example.id}"
            )

    @property
    def actions(self) -> ActionSequence:
        return linearize(self.target)

    @classmethod
    def full(cls, example: Example, target: ParseTree) -> MaskedExample:
        return cls(example, target, (True,) * len(linearize(target)))

    @classmethod
    def intent_only(cls, example: Example, target: ParseTree) -> MaskedExample:
        length = len(linearize(target))
        return cls(example, target, (True,) + (False,) * (length - 1))


@dataclass(frozen=True)
class Prediction:
    tree: ParseTree | None
    valid: bool
    actions: ActionSequence


def _pad(rows: list[list[int]], value: int) -> tuple[torch.Tensor, torch.Tensor]:
    width = max(len(row) for row in rows)
    ids = torch.full((len(rows), width), value, dtype=torch.long)
    pad = torch.ones((len(rows), width), dtype=torch.bool)
    for i, row in enumerate(rows):
        ids[i, :len(row)] = torch.tensor(row, dtype=torch.long)
        pad[i, :len(row)] = False
    return ids, pad


def encode_sources(model: ParserModel, queries: Sequence[Sequence[str]]) -> tuple[torch.Tensor, torch.Tensor]:
    limit = model.config.max_query_tokens
    for query in queries:
        if not 0 < len(query) <= limit:
            raise ParserError(f"query of {len(query)} tokens; the parser accepts 1 to {limit}")
    return _pad([model.token_vocab.encode(query) for query in queries], 0)


def encode_batch(model: ParserModel, items: Sequence[MaskedExample]) -> EncodedBatch:
    """Teacher-forcing tensors: inputs are the start symbol plus the gold prefix."""
    vocab = model.action_vocab
    source_ids, source_pad = encode_sources(model, [item.example.query_tokens for item in items])
    inputs, positions, is_copy, targets = [], [], [], []
    for item in items:
        actions = item.actions
        if len(actions) > model.config.max_action_len:
            raise ParserError(f"{item.example.id} linearizes to {len(actions)} actions")
        previous = actions[:-1]
        inputs.append([vocab.start] + [vocab.input_id(action) for action in previous])
        positions.append([0] + [action.index if action.kind is ActionKind.COPY else 0 for action in previous])
        is_copy.append([0] + [int(action.kind is ActionKind.COPY) for action in previous])
        targets.append([
            vocab.target_id(action) if keep else IGNORE_INDEX for action, keep in zip(actions, item.loss_mask)
        ])
    input_ids, target_pad = _pad(inputs, 0)
    return EncodedBatch(
        source_ids=source_ids,
        source_pad=source_pad,
        input_ids=input_ids,
        copy_positions=_pad(positions, 0)[0],
        input_is_copy=_pad(is_copy, 0)[0].bool(),
        target_pad=target_pad,
        targets=_pad(targets, IGNORE_INDEX)[0],
    )


def masked_cross_entropy(logits: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
    total = F.cross_entropy(logits.flatten(0, 1), targets.flatten(), ignore_index=IGNORE_INDEX, reduction="sum")
    count = (targets != IGNORE_INDEX).sum().clamp(min=1)
    return total / count


def loss(model: ParserModel, batch: Sequence[MaskedExample], head: str = MAIN_HEAD) -> torch.Tensor:
    """Mean cross-entropy over the unmasked positions of ``batch`` under ``head``."""
    encoded = encode_batch(model, batch)
    return masked_cross_entropy(model(encoded, head), encoded.targets)


class EpochSampler:
    """Indices from successive seeded permutations, so every example is seen once per pass."""

    def __init__(self, size: int, rng: np.random.Generator):
        self.size = size
        self.rng = rng
        self.order: list[int] = []

    def take(self, count: int) -> list[int]:
        picked = []
        while len(picked) < count:
            if not self.order:
                self.order = self.rng.permutation(self.size).tolist()
            picked.append(self.order.pop())
        return picked


def train(
    model: ParserModel,
    data: Sequence[MaskedExample],
    config: ParserConfig,
    head: str = MAIN_HEAD,
    seed: int = 0,
    steps: int | None = None,
    warmup_steps: int | None = None,
) -> ParserModel:
    return train_routed(model, {head: data}, config, seed=seed, steps=steps, warmup_steps=warmup_steps)


def train_routed(
    model: ParserModel,
    routed: Mapping[str, Sequence[MaskedExample]],
    config: ParserConfig,
    seed: int = 0,
    steps: int | None = None,
    warmup_steps: int | None = None,
) -> ParserModel:
    """
    Optimise ``model`` in place, each batch split evenly across the heads in ``routed``.

    The loss of a step is the sum of the per-head mean losses; heads not in
    ``routed`` receive no gradient and are left untouched by the optimizer.
    """
    steps = config.train_steps if steps is None else steps
    warmup = config.warmup_steps if warmup_steps is None else warmup_steps
    heads = sorted(routed)
    if not heads:
        raise EmptyData("no training data routed to any head")
    for head in heads:
        model.require_head(head)
        if not routed[head]:
            raise EmptyData(f"no training examples for head {head!r}")
    if steps == 0:
        return model

    rng = seed_everything(seed)
    samplers = {head: EpochSampler(len(routed[head]), rng) for head in heads}
    share = max(1, config.batch_size // len(heads))
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    scheduler = torch.optim.lr_scheduler.LambdaLR(
        optimizer, lambda step: min(1.0, (step + 1) / warmup) if warmup else 1.0
    )

    model.train()
    for step in range(1, steps + 1):
        optimizer.zero_grad(set_to_none=True)
        total = 0.0
        for head in heads:
            batch = [routed[head][i] for i in samplers[head].take(share)]
            total = total + loss(model, batch, head)
        total.backward()
        optimizer.step()
        scheduler.step()
        if step % config.log_every == 0 or step == steps:
            logger.debug("step {}/{} heads={} loss={:.4f}", step, steps, ",".join(heads), total.item())
    return model.eval()


@torch.no_grad()
def predict_batch(
    model: ParserModel, queries: Sequence[Sequence[str]], head: str = MAIN_HEAD, batch_size: int = 64
) -> list[Prediction]:
    """
    Greedy decoding until the root bracket closes or 2*len(query)+64 actions.
    Queries the encoder cannot take (empty or over ``max_query_tokens``) come
    back as invalid predictions without a tree.
    """
    model.require_head(head)
    limit = model.config.max_query_tokens
    decodable = [row for row, query in enumerate(queries) if 0 < len(query) <= limit]
    if len(decodable) < len(queries):
        logger.warning("{} of {} queries exceed {} tokens or are empty; scored as invalid",
                       len(queries) - len(decodable), len(queries), limit)
    predictions = [Prediction(None, False, ()) for _ in queries]
    was_training = model.training
    model.eval()
    for start in range(0, len(decodable), batch_size):
        rows = decodable[start:start + batch_size]
        for row, prediction in zip(rows, _decode_chunk(model, [queries[row] for row in rows], head)):
            predictions[row] = prediction
    model.train(was_training)
    return predictions


def predict(model: ParserModel, query_tokens: Sequence[str], head: str = MAIN_HEAD) -> Prediction:
    return predict_batch(model, [query_tokens], head)[0]


def _decode_chunk(model: ParserModel, queries: Sequence[Sequence[str]], head: str) -> list[Prediction]:
    vocab = model.action_vocab
    source_ids, source_pad = encode_sources(model, queries)
    memory = model.encode(source_ids, source_pad)
    output = model.heads[head]
    size = len(queries)
    caps = [2 * len(query) + 64 for query in queries]
    inputs = [[vocab.start] for _ in queries]
    positions = [[0] for _ in queries]
    is_copy = [[False] for _ in queries]
    decoded: list[list] = [[] for _ in queries]
    depth = [0] * size
    done = [False] * size

    while not all(done):
        batch = EncodedBatch(
            source_ids=source_ids,
            source_pad=source_pad,
            input_ids=torch.tensor(inputs, dtype=torch.long),
            copy_positions=torch.tensor(positions, dtype=torch.long),
            input_is_copy=torch.tensor(is_copy, dtype=torch.bool),
            target_pad=torch.zeros((size, len(inputs[0])), dtype=torch.bool),
        )
        states = model.decode(batch, memory)[:, -1:]
        choices = output(states, memory, source_pad)[:, 0].argmax(dim=-1).tolist()
        for row, choice in enumerate(choices):
            action = vocab.action(choice)
            if not done[row]:
                decoded[row].append(action)
                if action.kind is ActionKind.OPEN:
                    depth[row] += 1
                elif action.kind is ActionKind.CLOSE:
                    depth[row] -= 1
                done[row] = depth[row] <= 0 or len(decoded[row]) >= caps[row]
            inputs[row].append(vocab.input_id(action))
            positions[row].append(action.index if action.kind is ActionKind.COPY else 0)
            is_copy[row].append(action.kind is ActionKind.COPY)

    return [_finish(actions, query) for actions, query in zip(decoded, queries)]


def _finish(actions: list, query: Sequence[str]) -> Prediction:
    actions = truncate_at_root_close(actions)
    try:
        return Prediction(delinearize(actions, query), True, actions)
    except MalformedSequence:
        return Prediction(salvage(actions, query), False, actions)
