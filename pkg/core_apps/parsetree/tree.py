"""
Bracketed intent/slot trees in the decoupled TOP style.

A tree stores slot spans as token indices into its query, so the same
``ParseTree`` value is only meaningful next to the tokens it was built from.
Canonical text looks like::

    (IN:GET_DIRECTIONS (SL:DESTINATION "work" ) (SL:OBSTRUCTION "traffic" ) )
"""
from __future__ import annotations

import re
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterator, Sequence

from .exceptions import EmptyInput, MalformedTree, UnbalancedBrackets, UnknownSpan

INTENT_PREFIX = "IN:"
SLOT_PREFIX = "SL:"

_TOKEN_RE = re.compile(r'\(|\)|"[^"]*"|[^\s()"]+')


class NodeKind(str, Enum):
    INTENT = "intent"
    SLOT = "slot"


def kind_of(label: str) -> NodeKind:
    if label.startswith(INTENT_PREFIX):
        return NodeKind.INTENT
    if label.startswith(SLOT_PREFIX):
        return NodeKind.SLOT
    raise MalformedTree(f"label {label!r} is neither an intent nor a slot")


@dataclass(frozen=True)
class ParseTree:
    kind: NodeKind
    label: str
    span: tuple[int, ...] = ()
    children: tuple[ParseTree, ...] = ()

    @classmethod
    def intent(cls, label: str, *children: ParseTree) -> ParseTree:
        return cls(NodeKind.INTENT, label, (), tuple(children))

    @classmethod
    def slot(cls, label: str, span: Sequence[int] = (), children: Sequence[ParseTree] = ()) -> ParseTree:
        return cls(NodeKind.SLOT, label, tuple(span), tuple(children))

    @property
    def is_intent(self) -> bool:
        return self.kind is NodeKind.INTENT

    @property
    def has_arguments(self) -> bool:
        return bool(self.children)

    def iter_nodes(self) -> Iterator[ParseTree]:
        """Depth-first, parents before children."""
        yield self
        for child in self.children:
            yield from child.iter_nodes()

    def node_count(self) -> int:
        return sum(1 for _ in self.iter_nodes())

    def token_indices(self) -> list[int]:
        return [index for node in self.iter_nodes() for index in node.span]

    def labels(self) -> set[str]:
        return {node.label for node in self.iter_nodes()}

    def relabel(self, label: str) -> ParseTree:
        return replace(self, label=label)

    def with_children(self, children: Sequence[ParseTree]) -> ParseTree:
        return replace(self, children=tuple(children))


def validate(tree: ParseTree, n_tokens: int) -> ParseTree:
    """Raise ``MalformedTree`` unless ``tree`` satisfies every structural invariant."""
    if tree.kind is not NodeKind.INTENT:
        raise MalformedTree("root must be an intent")
    _validate_node(tree)
    indices = tree.token_indices()
    if any(index < 0 or index >= n_tokens for index in indices):
        raise MalformedTree(f"token index out of bounds for a query of {n_tokens} tokens")
    if any(b <= a for a, b in zip(indices, indices[1:])):
        raise MalformedTree("token indices must increase in depth-first order")
    return tree


def _validate_node(node: ParseTree) -> None:
    if kind_of(node.label) is not node.kind:
        raise MalformedTree(f"label {node.label!r} does not match node kind {node.kind.value}")
    if node.kind is NodeKind.INTENT:
        if node.span:
            raise MalformedTree(f"intent {node.label} cannot carry a token span")
        if any(child.kind is not NodeKind.SLOT for child in node.children):
            raise MalformedTree(f"intent {node.label} may only hold slots")
    else:
        if bool(node.span) == bool(node.children):
            raise MalformedTree(f"slot {node.label} needs either a span or nested intents")
        if any(child.kind is not NodeKind.INTENT for child in node.children):
            raise MalformedTree(f"slot {node.label} may only nest intents")
        if any(b != a + 1 for a, b in zip(node.span, node.span[1:])):
            raise MalformedTree(f"slot {node.label} span is not contiguous")
    for child in node.children:
        _validate_node(child)


def parse_bracketed(text: str, query_tokens: Sequence[str]) -> ParseTree:
    """Parse canonical bracket text, resolving quoted spans to the leftmost match after the previous span."""
    if text is None or not text.strip():
        raise EmptyInput("empty parse")
    if text.count('"') % 2:
        raise MalformedTree("unterminated quoted span")
    tokens = _TOKEN_RE.findall(text)

    depth = 0
    for token in tokens:
        depth += token == "("
        depth -= token == ")"
        if depth < 0:
            raise UnbalancedBrackets(f"unexpected ')' in {text!r}")
    if depth:
        raise UnbalancedBrackets(f"{depth} unclosed bracket(s) in {text!r}")

    parser = _BracketParser(tokens, list(query_tokens))
    tree = parser.node()
    if parser.pos != len(tokens):
        raise MalformedTree(f"trailing content after the root node in {text!r}")
    return validate(tree, len(query_tokens))


class _BracketParser:
    def __init__(self, tokens: list[str], query: list[str]):
        self.tokens = tokens
        self.query = query
        self.pos = 0
        self.cursor = 0

    def take(self) -> str:
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def node(self) -> ParseTree:
        if self.take() != "(":
            raise MalformedTree("expected '('")
        label = self.take()
        if label in ("(", ")") or label.startswith('"'):
            raise MalformedTree("a bracket must open with a label")
        kind = kind_of(label)
        span: tuple[int, ...] = ()
        children: list[ParseTree] = []
        while True:
            token = self.tokens[self.pos]
            if token == ")":
                self.pos += 1
                break
            if token == "(":
                children.append(self.node())
            elif token.startswith('"'):
                self.pos += 1
                if kind is NodeKind.INTENT or span or children:
                    raise MalformedTree(f"unexpected quoted text inside {label}")
                span = self.resolve(token[1:-1])
            else:
                raise MalformedTree(f"unquoted text {token!r} inside {label}")
        return ParseTree(kind, label, span, tuple(children))

    def resolve(self, text: str) -> tuple[int, ...]:
        words = text.split()
        if not words:
            raise MalformedTree("empty quoted span")
        start = _find(self.query, words, self.cursor)
        if start is None:
            if _find(self.query, words, 0) is None:
                raise UnknownSpan(text)
            raise MalformedTree(f"span {text!r} occurs only before an earlier span")
        self.cursor = start + len(words)
        return tuple(range(start, start + len(words)))


def _find(haystack: list[str], needle: list[str], start: int) -> int | None:
    width = len(needle)
    for i in range(start, len(haystack) - width + 1):
        if haystack[i:i + width] == needle:
            return i
    return None


def serialize(tree: ParseTree, query_tokens: Sequence[str]) -> str:
    parts: list[str] = []
    _emit(tree, list(query_tokens), parts)
    return " ".join(parts)


def _emit(node: ParseTree, query: list[str], parts: list[str]) -> None:
    parts.append(f"({node.label}")
    if node.span:
        parts.append('"' + " ".join(query[i] for i in node.span) + '"')
    for child in node.children:
        _emit(child, query, parts)
    parts.append(")")


def exact_match(a: ParseTree, b: ParseTree) -> bool:
    """Whole-tree equality: labels, structure, child order and spans. No partial credit."""
    return a == b


def top_intent(tree: ParseTree) -> str:
    return tree.label
