"""Self-describing parser archives: config, vocabularies, head names and tensors."""
from __future__ import annotations

import os
from pathlib import Path

import torch
from loguru import logger

from .config import ParserConfig
from .network import ParserModel, build_parser
from .vocab import ActionVocabulary, Vocabulary

FORMAT_VERSION = 1


def save_checkpoint(model: ParserModel, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format": FORMAT_VERSION,
        "config": model.config.model_dump(),
        "tokens": model.token_vocab.to_list(),
        "labels": list(model.action_vocab.labels),
        "heads": model.head_names,
        "state_dict": model.state_dict(),
    }
    # written beside the target and renamed so readers never see a partial file
    partial = path.with_name(path.name + ".partial")
    torch.save(payload, partial)
    os.replace(partial, path)
    logger.debug("Saved parser with heads {} to {}", model.head_names, path)
    return path


def load_checkpoint(path) -> ParserModel:
    payload = torch.load(Path(path), map_location="cpu", weights_only=True)
    model = build_parser(
        ParserConfig.model_validate(payload["config"]),
        Vocabulary(payload["tokens"]),
        ActionVocabulary(payload["labels"]),
        heads=tuple(payload["heads"]),
    )
    model.load_state_dict(payload["state_dict"])
    return model.eval()
