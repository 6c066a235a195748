"""Benchmark protocol: repeated seeded splits, top-k accuracy, sweeps.

Trial t of a protocol run derives its split seed as master_seed + t, so
any individual trial can be reproduced in isolation.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .baselines import CrcClassifier, NscClassifier
from .classifier import LdsrClassifier
from .dataset import ClassPartitionedDataset, SplitSpec, draw_split
from .errors import ConfigError, DimensionMismatch
from .kernel import KldsrClassifier
from .solver import HyperParams

METHODS = ("ldsr", "kldsr", "crc", "nsc")
TOP_K = 5


@dataclass(frozen=True)
class TrialResult:
    """Accuracy and confusion counts of one classifier on one split."""

    method: str
    seed: int
    top1: float
    top5: float
    confusion: np.ndarray
    labels: np.ndarray  # row/column labels of the confusion matrix
    seconds: float


@dataclass(frozen=True)
class MethodSummary:
    """Aggregate over the trials of one protocol run."""

    method: str
    n_per_class: int
    trials: int
    mean_top1: float
    std_top1: float
    mean_top5: float
    seconds: float


def make_classifier(
    method: str,
    train: ClassPartitionedDataset,
    hp: HyperParams,
    kernel_kind: str = "rbf",
):
    if method == "ldsr":
        return LdsrClassifier(train, hp)
    if method == "kldsr":
        return KldsrClassifier(train, hp, kernel_kind)
    if method == "crc":
        return CrcClassifier(train, hp.lam)
    if method == "nsc":
        return NscClassifier(train)
    raise ConfigError(f"unknown method {method!r}; choose from {METHODS}")


def _decide_all(classifier, queries: np.ndarray, threads: int):
    n = queries.shape[1]
    if threads <= 1 or n < 2 * threads:
        return classifier.decide_batch(queries)
    bounds = np.linspace(0, n, threads + 1).astype(int)
    chunks = [queries[:, a:b] for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(classifier.decide_batch, chunks))
    return [d for part in parts for d in part]


def evaluate(
    method,
    train: ClassPartitionedDataset,
    test: ClassPartitionedDataset,
    hp: HyperParams | None = None,
    threads: int = 1,
    kernel_kind: str = "rbf",
    seed: int = 0,
) -> TrialResult:
    """Classify every test column and tabulate top-1/top-5 accuracy.

    ``method`` is a registry name or any object with a decide_batch
    method. Test classes never seen in training count as errors.
    """
    if train.n_features != test.n_features:
        raise DimensionMismatch(
            f"train has {train.n_features} features, test has {test.n_features}"
        )
    if test.n_samples == 0:
        raise ValueError("test set is empty")
    if isinstance(method, str):
        classifier = make_classifier(method, train, hp or HyperParams(), kernel_kind)
        name = method
    else:
        classifier = method
        name = getattr(classifier, "method", type(classifier).__name__)
    start = time.perf_counter()
    decisions = _decide_all(classifier, test.features, threads)
    seconds = time.perf_counter() - start

    labels = np.union1d(train.class_labels, test.class_labels)
    index = {label: i for i, label in enumerate(labels)}
    confusion = np.zeros((len(labels), len(labels)), dtype=np.int64)
    truth = test.column_labels
    top1_hits = top5_hits = 0
    for j, decision in enumerate(decisions):
        true = truth[j]
        confusion[index[true], index[decision.predicted]] += 1
        top = decision.ranking[:TOP_K]
        if decision.predicted == true:
            top1_hits += 1
        if np.any(top == true):
            top5_hits += 1
    n = test.n_samples
    return TrialResult(
        method=name,
        seed=seed,
        top1=top1_hits / n,
        top5=top5_hits / n,
        confusion=confusion,
        labels=labels,
        seconds=seconds,
    )


def run_protocol(
    pool: ClassPartitionedDataset,
    spec: SplitSpec,
    methods,
    hp: HyperParams,
    designated_test: ClassPartitionedDataset | None = None,
    max_test: int | None = None,
    threads: int = 1,
    kernel_kind: str = "rbf",
    transform=None,
) -> tuple[list[MethodSummary], list[TrialResult]]:
    """Repeated random splits; per-method mean/std of top-1 accuracy.

    The held-out remainder of each split is the test set unless a
    designated test set is supplied; ``max_test`` caps the evaluated
    test columns with a seeded subsample (desk-scale runs). An optional
    ``transform(train, seed)`` rewrites each trial's training set
    (dictionary compaction).
    """
    trials: list[TrialResult] = []
    for t in range(spec.trials):
        tseed = spec.seed + t
        train, held_out = draw_split(pool, replace(spec, seed=tseed))
        test = designated_test if designated_test is not None else held_out
        if max_test is not None:
            test = test.subsample(max_test, seed=tseed)
        if transform is not None:
            train = transform(train, tseed)
        for method in methods:
            trials.append(
                evaluate(method, train, test, hp, threads, kernel_kind, seed=tseed)
            )
    summaries = []
    for method in methods:
        rows = [r for r in trials if r.method == method]
        top1 = np.array([r.top1 for r in rows])
        summaries.append(
            MethodSummary(
                method=method,
                n_per_class=spec.per_class_train,
                trials=spec.trials,
                mean_top1=float(np.mean(top1)),
                std_top1=float(np.std(top1)),
                mean_top5=float(np.mean([r.top5 for r in rows])),
                seconds=float(np.sum([r.seconds for r in rows])),
            )
        )
    return summaries, trials


def sweep_locality(
    pool: ClassPartitionedDataset,
    spec: SplitSpec,
    fractions,
    hp: HyperParams,
    methods=("ldsr", "kldsr"),
    designated_test: ClassPartitionedDataset | None = None,
    max_test: int | None = None,
    threads: int = 1,
    kernel_kind: str = "rbf",
) -> list[dict]:
    """Mean top-1 accuracy per locality fraction, per method."""
    rows = []
    for fraction in fractions:
        if not 0.0 < fraction <= 1.0:
            raise ConfigError(f"locality fraction {fraction} outside (0, 1]")
        summaries, _ = run_protocol(
            pool,
            spec,
            methods,
            replace(hp, locality_fraction=float(fraction)),
            designated_test=designated_test,
            max_test=max_test,
            threads=threads,
            kernel_kind=kernel_kind,
        )
        for summary in summaries:
            rows.append(
                {
                    "fraction": float(fraction),
                    "method": summary.method,
                    "mean_top1": summary.mean_top1,
                }
            )
    return rows
