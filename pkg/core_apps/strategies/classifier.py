"""Changed/unchanged selection classifier and the V1 filter it drives."""
from __future__ import annotations

import copy
from typing import Protocol, Sequence

import torch
import torch.nn.functional as F
from loguru import logger
from torch import nn

from core_apps.common.seeding import seed_everything
from core_apps.dataset import Example, Partition
from core_apps.parser import ClassifierConfig, EpochSampler, ParserModel, encode_sources

from .exceptions import SingleClassData

CHANGED_CLASS = 1


class ChangeDetector(Protocol):
    def predict_changed(self, queries: Sequence[Sequence[str]]) -> list[bool]:
        ...


class SelectionClassifier(nn.Module):
    """A V1 parser's encoder, mean-pooled over time, under a two-way feedforward head."""

    def __init__(self, parser: ParserModel, config: ClassifierConfig):
        super().__init__()
        self.config = parser.config
        self.classifier_config = config
        self.token_vocab = parser.token_vocab
        self.token_embedding = copy.deepcopy(parser.token_embedding)
        self.source_positions = copy.deepcopy(parser.source_positions)
        self.encoder = copy.deepcopy(parser.encoder)
        self.output = nn.Sequential(
            nn.Linear(parser.config.model_dim, config.hidden_dim),
            nn.ReLU(),
            nn.Dropout(config.dropout),
            nn.Linear(config.hidden_dim, 2),
        )

    def forward(self, source_ids: torch.Tensor, source_pad: torch.Tensor) -> torch.Tensor:
        positions = torch.arange(source_ids.size(1), device=source_ids.device)
        embedded = self.token_embedding(source_ids) + self.source_positions(positions)[None]
        memory = self.encoder(embedded, src_key_padding_mask=source_pad)
        keep = (~source_pad)[..., None].to(memory.dtype)
        pooled = (memory * keep).sum(dim=1) / keep.sum(dim=1)
        return self.output(pooled)

    @torch.no_grad()
    def changed_probability(self, queries: Sequence[Sequence[str]], batch_size: int = 256) -> torch.Tensor:
        self.eval()
        chunks = []
        for start in range(0, len(queries), batch_size):
            logits = self(*encode_sources(self, queries[start:start + batch_size]))
            chunks.append(logits.softmax(dim=-1)[:, CHANGED_CLASS])
        return torch.cat(chunks) if chunks else torch.zeros(0)

    def predict_changed(self, queries: Sequence[Sequence[str]]) -> list[bool]:
        return (self.changed_probability(queries) > self.classifier_config.threshold).tolist()


def train_selection_classifier(
    v2_train: Sequence[Example], v1_parser: ParserModel, config: ClassifierConfig, seed: int = 0
) -> SelectionClassifier:
    """Fit the classifier on annotated V2 examples: changed vs unchanged."""
    labels = [int(example.partition is Partition.CHANGED) for example in v2_train]
    if len(set(labels)) < 2:
        raise SingleClassData(f"{len(labels)} V2 examples cover a single class; need both changed and unchanged")

    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        classifier = SelectionClassifier(v1_parser, config)
    rng = seed_everything(seed)
    sampler = EpochSampler(len(v2_train), rng)
    optimizer = torch.optim.Adam(classifier.parameters(), lr=config.learning_rate)
    targets = torch.tensor(labels, dtype=torch.long)

    classifier.train()
    for step in range(1, config.train_steps + 1):
        picked = sampler.take(config.batch_size)
        source_ids, source_pad = encode_sources(classifier, [v2_train[i].query_tokens for i in picked])
        loss = F.cross_entropy(classifier(source_ids, source_pad), targets[picked])
        optimizer.zero_grad(set_to_none=True)
        loss.backward()
        optimizer.step()
        if step % 200 == 0 or step == config.train_steps:
            logger.debug("classifier step {}/{} loss={:.4f}", step, config.train_steps, loss.item())
    return classifier.eval()


def filter_v1(classifier: ChangeDetector, v1_examples: Sequence[Example]) -> tuple[list[Example], list[Example]]:
    """Split affected V1 examples into (predicted unchanged, predicted changed)."""
    decisions = classifier.predict_changed([example.query_tokens for example in v1_examples]) if v1_examples else []
    kept = [example for example, changed in zip(v1_examples, decisions) if not changed]
    flagged = [example for example, changed in zip(v1_examples, decisions) if changed]
    return kept, flagged


def classifier_accuracy(classifier: ChangeDetector, examples: Sequence[Example]) -> float:
    """Agreement with the annotated changed/unchanged tags."""
    if not examples:
        return 0.0
    decisions = classifier.predict_changed([example.query_tokens for example in examples])
    hits = sum(decision == (example.partition is Partition.CHANGED) for decision, example in zip(decisions, examples))
    return hits / len(examples)
