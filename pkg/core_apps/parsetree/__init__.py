from .actions import Action, ActionKind, ActionSequence, delinearize, linearize, salvage, truncate_at_root_close
from .exceptions import EmptyInput, MalformedSequence, MalformedTree, ParseTreeError, UnbalancedBrackets, UnknownSpan
from .tree import NodeKind, ParseTree, exact_match, parse_bracketed, serialize, top_intent, validate

__all__ = [
    "Action",
    "ActionKind",
    "ActionSequence",
    "EmptyInput",
    "MalformedSequence",
    "MalformedTree",
    "NodeKind",
    "ParseTree",
    "ParseTreeError",
    "UnbalancedBrackets",
    "UnknownSpan",
    "delinearize",
    "exact_match",
    "linearize",
    "parse_bracketed",
    "salvage",
    "serialize",
    "top_intent",
    "truncate_at_root_close",
    "validate",
]
