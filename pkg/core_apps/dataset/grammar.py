"""Template grammar and the deterministic toy corpus generator that stands in for TOP."""
from __future__ import annotations

import re
from functools import lru_cache
from pathlib import Path

import numpy as np
import yaml
from loguru import logger
from pydantic import BaseModel, ConfigDict

from core_apps.parsetree import ParseTree, ParseTreeError, parse_bracketed, serialize

from .examples import Example
from .exceptions import DegenerateGrammar

DEFAULT_GRAMMAR_PATH = Path(__file__).resolve().parent / "data" / "toy_grammar.yaml"
DEFAULT_CORPUS_SIZE = 6000
MIN_INTENTS = 8
MIN_SLOT_LABELS = 10
MAX_ATTEMPTS = 50

_PLACEHOLDER = re.compile(r"^\{([^{}]+)\}$")


class IntentTemplates(BaseModel):
    model_config = ConfigDict(extra="forbid")

    templates: list[str] = []


class SubtreeTemplates(BaseModel):
    model_config = ConfigDict(extra="forbid")

    intent: str
    templates: list[str]


class GrammarConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    prefixes: list[str] = [""]
    intents: dict[str, IntentTemplates]
    subtrees: dict[str, SubtreeTemplates] = {}
    lexicons: dict[str, list[str]]

    def slot_labels(self) -> set[str]:
        labels = set()
        for template in self._all_templates():
            for token in template.split():
                match = _PLACEHOLDER.match(token)
                if match and "=" in match.group(1):
                    labels.add(match.group(1).split("=", 1)[0])
        return labels

    def _all_templates(self):
        for spec in self.intents.values():
            yield from spec.templates
        for spec in self.subtrees.values():
            yield from spec.templates

    def check(self) -> GrammarConfig:
        for intent, spec in self.intents.items():
            if not spec.templates:
                raise DegenerateGrammar(f"intent {intent} has no template", intent=intent)
        for name, spec in self.subtrees.items():
            if not spec.templates:
                raise DegenerateGrammar(f"subtree @{name} ({spec.intent}) has no template", intent=spec.intent)
        if len(self.intents) < MIN_INTENTS:
            raise DegenerateGrammar(f"grammar defines {len(self.intents)} intents, at least {MIN_INTENTS} are needed")
        if len(self.slot_labels()) < MIN_SLOT_LABELS:
            raise DegenerateGrammar(
                f"grammar uses {len(self.slot_labels())} slot labels, at least {MIN_SLOT_LABELS} are needed"
            )
        for template in self._all_templates():
            for token in template.split():
                match = _PLACEHOLDER.match(token)
                if not match:
                    continue
                source = match.group(1).split("=", 1)[-1]
                if source.startswith("@"):
                    if source[1:] not in self.subtrees:
                        raise DegenerateGrammar(f"template {template!r} names unknown subtree {source}")
                elif not self.lexicons.get(source):
                    raise DegenerateGrammar(f"template {template!r} names empty or unknown lexicon {source}")
        return self

    def check_intents(self, intents) -> None:
        """Every intent an update names must be producible by the grammar."""
        known = set(self.intents) | {spec.intent for spec in self.subtrees.values()}
        for intent in sorted(intents):
            if intent not in known:
                raise DegenerateGrammar(f"intent {intent} is named by an update but has no template", intent=intent)


@lru_cache(maxsize=1)
def default_grammar() -> GrammarConfig:
    with open(DEFAULT_GRAMMAR_PATH) as handle:
        return GrammarConfig.model_validate(yaml.safe_load(handle))


class _Realizer:
    def __init__(self, grammar: GrammarConfig, rng: np.random.Generator):
        self.grammar = grammar
        self.rng = rng

    def pick(self, options):
        return options[int(self.rng.integers(len(options)))]

    def realize(self, intent: str, template: str, tokens: list[str]) -> ParseTree:
        slots = []
        for token in template.split():
            match = _PLACEHOLDER.match(token)
            if not match:
                tokens.append(token)
                continue
            body = match.group(1)
            if "=" not in body:
                tokens.extend(self.pick(self.grammar.lexicons[body]).split())
                continue
            label, source = body.split("=", 1)
            if source.startswith("@"):
                subtree = self.grammar.subtrees[source[1:]]
                child = self.realize(subtree.intent, self.pick(subtree.templates), tokens)
                slots.append(ParseTree.slot(label, children=[child]))
            else:
                start = len(tokens)
                tokens.extend(self.pick(self.grammar.lexicons[source]).split())
                slots.append(ParseTree.slot(label, span=range(start, len(tokens))))
        return ParseTree.intent(intent, *slots)


def generate_toy_corpus(
    grammar: GrammarConfig | None = None, seed: int = 0, size: int = DEFAULT_CORPUS_SIZE
) -> list[Example]:
    """
    Sample ``size`` V2-labelled examples: intent uniformly, then template, then fillers.

    A draw whose spans would not resolve back to themselves from canonical
    text (a slot's words also appearing earlier) is redrawn, so every label
    survives the TSV round trip.
    """
    grammar = (grammar or default_grammar()).check()
    rng = np.random.default_rng(seed)
    realizer = _Realizer(grammar, rng)
    intents = sorted(grammar.intents)
    corpus = []
    for i in range(size):
        intent = realizer.pick(intents)
        for _ in range(MAX_ATTEMPTS):
            template_index = int(rng.integers(len(grammar.intents[intent].templates)))
            template = grammar.intents[intent].templates[template_index]
            tokens = realizer.pick(grammar.prefixes).split()
            tree = realizer.realize(intent, template, tokens)
            if _canonical(tree, tokens):
                break
        else:
            raise DegenerateGrammar(f"intent {intent} keeps producing ambiguous spans", intent=intent)
        corpus.append(
            Example(
                id=f"toy-{i:05d}",
                query_tokens=tuple(tokens),
                v2_label=tree,
                provenance={"intent": intent, "template": template_index, "slots": sorted(_slot_labels(tree))},
            )
        )
    logger.debug("Generated toy corpus of {} examples (seed {})", len(corpus), seed)
    return corpus


def _canonical(tree: ParseTree, tokens: list[str]) -> bool:
    try:
        return parse_bracketed(serialize(tree, tokens), tokens) == tree
    except ParseTreeError:
        return False


def _slot_labels(tree: ParseTree) -> set[str]:
    return {node.label for node in tree.iter_nodes() if not node.is_intent}
