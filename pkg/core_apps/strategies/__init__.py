from .classifier import (
    ChangeDetector,
    SelectionClassifier,
    classifier_accuracy,
    filter_v1,
    train_selection_classifier,
)
from .exceptions import MissingClassifier, MultipleNewIntents, SingleClassData, StrategyError
from .plans import (
    BASELINES,
    V1_HEAD,
    V1_PARSER_STAGE,
    V2_HEAD,
    FineTuneConfig,
    Strategy,
    TrainingPlan,
    TrainingStage,
    build_training_plan,
    intent_only_relabel,
    upsample_factor,
    v1_data,
    v2_data,
)

__all__ = [
    "BASELINES",
    "ChangeDetector",
    "FineTuneConfig",
    "MissingClassifier",
    "MultipleNewIntents",
    "SelectionClassifier",
    "SingleClassData",
    "Strategy",
    "StrategyError",
    "TrainingPlan",
    "TrainingStage",
    "V1_HEAD",
    "V1_PARSER_STAGE",
    "V2_HEAD",
    "build_training_plan",
    "classifier_accuracy",
    "filter_v1",
    "intent_only_relabel",
    "train_selection_classifier",
    "upsample_factor",
    "v1_data",
    "v2_data",
]
