"""TSV persistence for corpora and versioned datasets, plus the TOP dataset reader."""
from __future__ import annotations

from pathlib import Path
from typing import Iterable

from loguru import logger

from core_apps.parsetree import ParseTree, ParseTreeError, parse_bracketed, serialize, validate

from .examples import Example, Partition
from .exceptions import CorpusParseError
from .updates import UpdateSpec, VersionedDataset, classify_partition


def save_corpus(examples: Iterable[Example], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for example in examples:
            label = example.v2_label if example.v2_label is not None else example.v1_label
            handle.write(f"{example.id}\t{example.query}\t{serialize(label, example.query_tokens)}\n")
    return path


def _rows(path: Path, width: int):
    with open(path, encoding="utf-8") as handle:
        for idx, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            fields = line.split("\t")
            if len(fields) != width:
                raise CorpusParseError(path, idx, f"expected {width} tab-separated fields, found {len(fields)}")
            yield idx, fields


def _parse(path: Path, idx: int, text: str, tokens: tuple[str, ...]) -> ParseTree:
    try:
        return parse_bracketed(text, tokens)
    except ParseTreeError as err:
        raise CorpusParseError(path, idx, str(err)) from err


def load_corpus(path) -> list[Example]:
    path = Path(path)
    examples = []
    for idx, (example_id, query, parse) in _rows(path, 3):
        tokens = tuple(query.split())
        if not tokens:
            raise CorpusParseError(path, idx, "empty query")
        examples.append(Example(id=example_id, query_tokens=tokens, v2_label=_parse(path, idx, parse, tokens)))
    logger.debug("Loaded {} examples from {}", len(examples), path)
    return examples


def save_versioned(dataset: VersionedDataset, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for example in dataset.examples:
            handle.write(
                "\t".join([
                    example.id,
                    example.query,
                    example.render(example.v1_label),
                    example.render(example.v2_label),
                    example.partition.value,
                ]) + "\n"
            )
    return path


def load_versioned(path, spec: UpdateSpec) -> VersionedDataset:
    path = Path(path)
    examples = []
    for idx, (example_id, query, v1_text, v2_text, tag) in _rows(path, 5):
        tokens = tuple(query.split())
        v1_label = _parse(path, idx, v1_text, tokens)
        v2_label = _parse(path, idx, v2_text, tokens) if v2_text else None
        try:
            partition = Partition(tag)
        except ValueError:
            raise CorpusParseError(path, idx, f"unknown partition {tag!r}")
        if classify_partition(v1_label, v2_label, spec.affected) is not partition:
            raise CorpusParseError(path, idx, f"partition {tag} disagrees with the labels under update {spec.name}")
        examples.append(Example(example_id, tokens, v1_label, v2_label, partition))
    return VersionedDataset(examples, spec)


def load_top_tsv(path) -> list[Example]:
    """
    Read the public TOP release (raw utterance, tokenized utterance, bracketed tree).

    ``[IN:X words [SL:Y words ] ]`` becomes the decoupled form: words directly
    under an intent are dropped, words under a slot become its span.
    """
    path = Path(path)
    examples = []
    for idx, (_, tokenized, tree_text) in _rows(path, 3):
        tokens = tuple(tokenized.split())
        try:
            tree = _decouple(tree_text.split(), len(tokens))
        except (ParseTreeError, IndexError, ValueError) as err:
            raise CorpusParseError(path, idx, f"unreadable TOP tree: {err}")
        examples.append(Example(id=f"top-{idx:06d}", query_tokens=tokens, v2_label=tree))
    logger.info("Loaded {} TOP examples from {}", len(examples), path)
    return examples


def _decouple(parts: list[str], n_tokens: int) -> ParseTree:
    position = 0
    word_index = 0

    def node() -> ParseTree:
        nonlocal position, word_index
        label = parts[position][1:]
        position += 1
        span, children = [], []
        while parts[position] != "]":
            if parts[position].startswith("["):
                children.append(node())
            else:
                span.append(word_index)
                word_index += 1
                position += 1
        position += 1
        if label.startswith("SL:"):
            if children:
                return ParseTree.slot(label, children=children)
            return ParseTree.slot(label, span=span)
        return ParseTree.intent(label, *children)

    if not parts or not parts[0].startswith("["):
        raise ValueError("tree must open with a bracket")
    tree = node()
    if position != len(parts) or word_index != n_tokens:
        raise ValueError("tree words do not line up with the tokenized utterance")
    return validate(tree, n_tokens)
