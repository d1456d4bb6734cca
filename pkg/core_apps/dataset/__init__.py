from .corpus_io import load_corpus, load_top_tsv, load_versioned, save_corpus, save_versioned
from .examples import Example, Partition, partition_counts
from .exceptions import (
    AmbiguousRules,
    CorpusParseError,
    DatasetError,
    DegenerateGrammar,
    InsufficientPartition,
    MissingV2Label,
)
from .grammar import DEFAULT_CORPUS_SIZE, GrammarConfig, default_grammar, generate_toy_corpus
from .splits import SplitBundle, SplitSizes, sample_splits
from .updates import (
    MergeIntent,
    RemoveArgument,
    RenameArguments,
    UpdateSpec,
    VersionedDataset,
    apply_reverse_update,
    build_version_pair,
    classify_partition,
    default_updates,
    load_update_specs,
)

# Partition sizes (changed, unchanged, trivially unchanged) the five updates
# produce on the full TOP corpus.
PUBLISHED_PARTITION_SIZES = {
    "A": (1719, 1756, 32266),
    "B": (3625, 3776, 28340),
    "C": (635, 21114, 13992),
    "D": (10044, 422, 25275),
    "E": (285, 3942, 31514),
}

__all__ = [
    "AmbiguousRules",
    "CorpusParseError",
    "DEFAULT_CORPUS_SIZE",
    "DatasetError",
    "DegenerateGrammar",
    "Example",
    "GrammarConfig",
    "InsufficientPartition",
    "MergeIntent",
    "MissingV2Label",
    "Partition",
    "PUBLISHED_PARTITION_SIZES",
    "RemoveArgument",
    "RenameArguments",
    "SplitBundle",
    "SplitSizes",
    "UpdateSpec",
    "VersionedDataset",
    "apply_reverse_update",
    "build_version_pair",
    "classify_partition",
    "default_grammar",
    "default_updates",
    "generate_toy_corpus",
    "load_corpus",
    "load_top_tsv",
    "load_update_specs",
    "load_versioned",
    "partition_counts",
    "sample_splits",
    "save_corpus",
    "save_versioned",
]
