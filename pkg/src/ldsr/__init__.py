"""Locality-based discriminant sparse representation classifiers.

A closed-form coefficient solver with within-class and between-class
block regularizers, the two-stage LDSR classifier, its RBF-kernel
variant KLDSR, CRC/NSC baselines, per-class dictionary compaction, and
a seeded benchmark harness.
"""

from .baselines import CrcClassifier, NscClassifier, crc_classify, nsc_classify
from .classifier import (
    ClassDecision,
    LdsrClassifier,
    LocalitySet,
    classify,
    classify_batch,
    select_locality,
)
from .dataset import (
    ClassPartitionedDataset,
    SplitSpec,
    draw_split,
    from_labeled_columns,
    load_csv,
    load_idx,
    normalize_columns,
    save_csv,
)
from .dictlearn import ClassDictionary, compact_dataset, learn_dictionary
from .evaluate import (
    MethodSummary,
    TrialResult,
    evaluate,
    make_classifier,
    run_protocol,
    sweep_locality,
)
from .kernel import (
    KernelGram,
    KldsrClassifier,
    QueryKernelVector,
    build_gram,
    kclassify,
    kernel_distance,
    ksolve,
    median_bandwidth,
    query_vector,
    rbf,
)
from .solver import (
    CoefficientSolution,
    HyperParams,
    RegularizerBlocks,
    build_blocks,
    gradient,
    objective,
    residual_distances,
    solve,
)

__version__ = "0.1.0"

__all__ = [
    "ClassDecision",
    "ClassDictionary",
    "ClassPartitionedDataset",
    "CoefficientSolution",
    "CrcClassifier",
    "HyperParams",
    "KernelGram",
    "KldsrClassifier",
    "LdsrClassifier",
    "LocalitySet",
    "MethodSummary",
    "NscClassifier",
    "QueryKernelVector",
    "RegularizerBlocks",
    "SplitSpec",
    "TrialResult",
    "build_blocks",
    "build_gram",
    "classify",
    "classify_batch",
    "compact_dataset",
    "crc_classify",
    "draw_split",
    "evaluate",
    "from_labeled_columns",
    "gradient",
    "kclassify",
    "kernel_distance",
    "ksolve",
    "learn_dictionary",
    "load_csv",
    "load_idx",
    "make_classifier",
    "median_bandwidth",
    "normalize_columns",
    "nsc_classify",
    "objective",
    "query_vector",
    "rbf",
    "residual_distances",
    "run_protocol",
    "save_csv",
    "select_locality",
    "solve",
    "sweep_locality",
]
