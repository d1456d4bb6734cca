"""Token and action vocabularies shared by every head of a parser."""
from __future__ import annotations

from typing import Iterable

from core_apps.parsetree import Action, ActionKind

from .exceptions import ParserError

PAD = "<pad>"
UNK = "<unk>"


class Vocabulary:
    def __init__(self, tokens: Iterable[str]):
        self.itos = [PAD, UNK] + sorted(set(tokens) - {PAD, UNK})
        self.stoi = {token: index for index, token in enumerate(self.itos)}

    @classmethod
    def build(cls, queries: Iterable[Iterable[str]]) -> Vocabulary:
        return cls(token for query in queries for token in query)

    def __len__(self) -> int:
        return len(self.itos)

    def index(self, token: str) -> int:
        return self.stoi.get(token, 1)

    def encode(self, tokens: Iterable[str]) -> list[int]:
        return [self.index(token) for token in tokens]

    def to_list(self) -> list[str]:
        return self.itos[2:]


class ActionVocabulary:
    """
    Fixed part of the output space: ``CLOSE`` at 0 and one ``OPEN`` per label.

    ``COPY(i)`` has no fixed id; it is scored at ``len(self) + i``. Decoder
    inputs add two ids past the fixed part, a COPY marker and a start symbol.
    """

    def __init__(self, labels: Iterable[str]):
        self.labels = sorted(set(labels))
        self._open = {label: index + 1 for index, label in enumerate(self.labels)}

    @classmethod
    def build(cls, trees) -> ActionVocabulary:
        return cls(label for tree in trees if tree is not None for label in tree.labels())

    def __len__(self) -> int:
        return len(self.labels) + 1

    def __contains__(self, label: str) -> bool:
        return label in self._open

    @property
    def copy_marker(self) -> int:
        return len(self)

    @property
    def start(self) -> int:
        return len(self) + 1

    def target_id(self, action: Action) -> int:
        if action.kind is ActionKind.CLOSE:
            return 0
        if action.kind is ActionKind.OPEN:
            if action.label not in self._open:
                raise ParserError(f"label {action.label} is not in the action vocabulary")
            return self._open[action.label]
        return len(self) + action.index

    def input_id(self, action: Action) -> int:
        return self.copy_marker if action.kind is ActionKind.COPY else self.target_id(action)

    def action(self, target_id: int) -> Action:
        if target_id == 0:
            return Action.close()
        if target_id < len(self):
            return Action.open(self.labels[target_id - 1])
        return Action.copy(target_id - len(self))
