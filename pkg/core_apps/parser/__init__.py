from .checkpoint import load_checkpoint, save_checkpoint
from .config import DESK_OVERRIDES, ClassifierConfig, ParserConfig
from .exceptions import DuplicateHead, EmptyData, ParserError, UnknownHead
from .network import MAIN_HEAD, EncodedBatch, OutputHead, ParserModel, build_parser
from .training import (
    IGNORE_INDEX,
    EpochSampler,
    MaskedExample,
    Prediction,
    encode_batch,
    encode_sources,
    loss,
    masked_cross_entropy,
    predict,
    predict_batch,
    train,
    train_routed,
)
from .vocab import ActionVocabulary, Vocabulary

__all__ = [
    "ActionVocabulary",
    "ClassifierConfig",
    "DESK_OVERRIDES",
    "DuplicateHead",
    "EmptyData",
    "EncodedBatch",
    "EpochSampler",
    "IGNORE_INDEX",
    "MAIN_HEAD",
    "MaskedExample",
    "OutputHead",
    "ParserConfig",
    "ParserError",
    "ParserModel",
    "Prediction",
    "UnknownHead",
    "Vocabulary",
    "build_parser",
    "encode_batch",
    "encode_sources",
    "load_checkpoint",
    "loss",
    "masked_cross_entropy",
    "predict",
    "predict_batch",
    "save_checkpoint",
    "train",
    "train_routed",
]
