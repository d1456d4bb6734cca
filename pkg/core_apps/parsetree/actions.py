"""Depth-first OPEN/COPY/CLOSE action sequences, the decoder's output space."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .exceptions import MalformedSequence, MalformedTree, ParseTreeError
from .tree import NodeKind, ParseTree, kind_of, validate


class ActionKind(str, Enum):
    OPEN = "OPEN"
    CLOSE = "CLOSE"
    COPY = "COPY"


@dataclass(frozen=True)
class Action:
    kind: ActionKind
    label: str | None = None
    index: int | None = None

    @classmethod
    def open(cls, label: str) -> Action:
        return cls(ActionKind.OPEN, label=label)

    @classmethod
    def close(cls) -> Action:
        return cls(ActionKind.CLOSE)

    @classmethod
    def copy(cls, index: int) -> Action:
        return cls(ActionKind.COPY, index=index)

    def __str__(self) -> str:
        if self.kind is ActionKind.OPEN:
            return f"OPEN({self.label})"
        if self.kind is ActionKind.COPY:
            return f"COPY({self.index})"
        return "CLOSE"


ActionSequence = tuple[Action, ...]


def linearize(tree: ParseTree) -> ActionSequence:
    actions: list[Action] = []

    def visit(node: ParseTree) -> None:
        actions.append(Action.open(node.label))
        actions.extend(Action.copy(index) for index in node.span)
        for child in node.children:
            visit(child)
        actions.append(Action.close())

    visit(tree)
    return tuple(actions)


def truncate_at_root_close(actions: Sequence[Action]) -> ActionSequence:
    """Cut a decoded sequence right after the CLOSE that balances its first OPEN."""
    depth = 0
    for position, action in enumerate(actions):
        if action.kind is ActionKind.OPEN:
            depth += 1
        elif action.kind is ActionKind.CLOSE:
            depth -= 1
            if depth <= 0:
                return tuple(actions[:position + 1])
    return tuple(actions)


class _Builder:
    __slots__ = ("kind", "label", "span", "children")

    def __init__(self, kind: NodeKind, label: str):
        self.kind = kind
        self.label = label
        self.span: list[int] = []
        self.children: list[ParseTree] = []

    def accepts(self, kind: NodeKind) -> bool:
        if self.kind is NodeKind.INTENT:
            return kind is NodeKind.SLOT
        return kind is NodeKind.INTENT and not self.span

    def accepts_copy(self, index: int) -> bool:
        if self.kind is not NodeKind.SLOT or self.children:
            return False
        return not self.span or index == self.span[-1] + 1

    def build(self) -> ParseTree | None:
        if self.kind is NodeKind.SLOT and not (self.span or self.children):
            return None
        return ParseTree(self.kind, self.label, tuple(self.span), tuple(self.children))


def delinearize(actions: Sequence[Action], query_tokens: Sequence[str]) -> ParseTree:
    """Rebuild the unique tree whose linearization is ``actions``; reject anything else."""
    n_tokens = len(query_tokens)
    stack: list[_Builder] = []
    root: ParseTree | None = None

    for position, action in enumerate(actions):
        if action.kind is ActionKind.OPEN:
            if root is not None:
                raise MalformedSequence(f"action {position} follows the closed root")
            try:
                kind = kind_of(action.label or "")
            except MalformedTree as err:
                raise MalformedSequence(str(err)) from err
            if not stack and kind is not NodeKind.INTENT:
                raise MalformedSequence("sequence must open with an intent")
            if stack and not stack[-1].accepts(kind):
                raise MalformedSequence(f"{action} cannot nest under {stack[-1].label}")
            stack.append(_Builder(kind, action.label))
        elif action.kind is ActionKind.COPY:
            if not stack:
                raise MalformedSequence(f"COPY at position {position} before any OPEN")
            if action.index is None or not 0 <= action.index < n_tokens:
                raise MalformedSequence(f"{action} is outside a query of {n_tokens} tokens")
            if not stack[-1].accepts_copy(action.index):
                raise MalformedSequence(f"{action} breaks the span of {stack[-1].label}")
            stack[-1].span.append(action.index)
        else:
            if not stack:
                raise MalformedSequence(f"unbalanced CLOSE at position {position}")
            node = stack.pop().build()
            if node is None:
                raise MalformedSequence(f"empty slot closed at position {position}")
            if stack:
                stack[-1].children.append(node)
            else:
                root = node

    if stack:
        raise MalformedSequence(f"{len(stack)} bracket(s) left open")
    if root is None:
        raise MalformedSequence("empty action sequence")
    try:
        return validate(root, n_tokens)
    except MalformedTree as err:
        raise MalformedSequence(str(err)) from err


def salvage(actions: Sequence[Action], query_tokens: Sequence[str]) -> ParseTree | None:
    """
    Best-effort tree for a sequence ``delinearize`` rejects.

    Offending actions are skipped (an invalid OPEN drops its whole bracket),
    empty slots are dropped and brackets still open at the end are closed.
    Returns ``None`` when not even a root intent can be recovered.
    """
    actions = truncate_at_root_close(actions)
    if not actions or actions[0].kind is not ActionKind.OPEN:
        return None
    n_tokens = len(query_tokens)
    stack: list[_Builder | None] = []
    root: ParseTree | None = None
    last_index = -1

    def close() -> None:
        nonlocal root
        builder = stack.pop()
        if builder is None:
            return
        node = builder.build()
        if node is None:
            return
        # a live builder never sits above an ignored bracket
        if stack:
            stack[-1].children.append(node)
        else:
            root = node

    for action in actions:
        ignoring = any(builder is None for builder in stack)
        if action.kind is ActionKind.OPEN:
            try:
                kind = kind_of(action.label or "")
            except ParseTreeError:
                kind = None
            if ignoring or kind is None:
                stack.append(None)
            elif not stack:
                stack.append(_Builder(kind, action.label) if kind is NodeKind.INTENT else None)
            elif stack[-1].accepts(kind):
                stack.append(_Builder(kind, action.label))
            else:
                stack.append(None)
        elif action.kind is ActionKind.COPY:
            index = action.index
            if ignoring or not stack or index is None or not 0 <= index < n_tokens or index <= last_index:
                continue
            if stack[-1].accepts_copy(index):
                stack[-1].span.append(index)
                last_index = index
        elif stack:
            close()
    while stack:
        close()

    if root is None:
        return None
    try:
        return validate(root, n_tokens)
    except MalformedTree:
        return None
