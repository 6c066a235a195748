"""Class-partitioned feature datasets: loading, validation, splits.

Samples are stored as columns of a dense ``(q, L)`` matrix, with columns
grouped contiguously by class. Original labels are kept for reporting;
class indexing inside the package is positional (0..M-1, in sorted label
order).
"""

from __future__ import annotations

import csv
import gzip
import struct
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    BadMagic,
    CountMismatch,
    InsufficientSamples,
    NonNumericFeature,
    RaggedRows,
    SingleClass,
    TruncatedFile,
    ZeroColumn,
)

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801


@dataclass(frozen=True)
class ClassPartitionedDataset:
    """Feature matrix with columns grouped by class.

    features : (q, L) float64, one sample per column
    class_labels : (M,) original labels, in sorted order
    offsets : (M+1,) int64, class c occupies columns offsets[c]:offsets[c+1]
    """

    features: np.ndarray
    class_labels: np.ndarray
    offsets: np.ndarray

    def __post_init__(self):
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-D (q, L) matrix")
        if len(self.offsets) != len(self.class_labels) + 1:
            raise ValueError("offsets must have one more entry than class_labels")
        if self.offsets[0] != 0 or self.offsets[-1] != self.features.shape[1]:
            raise ValueError("offsets must span all feature columns")
        if np.any(np.diff(self.offsets) < 0):
            raise ValueError("offsets must be non-decreasing")
        self.features.flags.writeable = False

    @property
    def n_features(self) -> int:
        return self.features.shape[0]

    @property
    def n_samples(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_labels)

    @property
    def counts(self) -> np.ndarray:
        """Per-class sample counts."""
        return np.diff(self.offsets)

    @property
    def column_labels(self) -> np.ndarray:
        """Original label of every column, in column order."""
        return np.repeat(self.class_labels, self.counts)

    def class_slice(self, c: int) -> slice:
        return slice(int(self.offsets[c]), int(self.offsets[c + 1]))

    def class_block(self, c: int) -> np.ndarray:
        """View of the columns belonging to class ``c``."""
        return self.features[:, self.class_slice(c)]

    def class_of_column(self, col: int) -> int:
        return int(np.searchsorted(self.offsets, col, side="right") - 1)

    def subset(self, columns: np.ndarray) -> "ClassPartitionedDataset":
        """Dataset restricted to the given columns (sorted ascending).

        Classes that lose all their columns are dropped.
        """
        columns = np.sort(np.asarray(columns, dtype=np.int64))
        per_class = np.histogram(columns, bins=self.offsets)[0]
        keep = per_class > 0
        offsets = np.concatenate(([0], np.cumsum(per_class[keep])))
        return ClassPartitionedDataset(
            features=np.ascontiguousarray(self.features[:, columns]),
            class_labels=self.class_labels[keep],
            offsets=offsets.astype(np.int64),
        )

    def subsample(self, size: int, seed: int) -> "ClassPartitionedDataset":
        """Seeded draw of ``size`` columns without replacement."""
        if size >= self.n_samples:
            return self
        rng = np.random.default_rng(seed)
        cols = rng.choice(self.n_samples, size=size, replace=False)
        return self.subset(cols)

    def with_features(self, features: np.ndarray) -> "ClassPartitionedDataset":
        """Same partitioning over a replacement feature matrix."""
        if features.shape[1] != self.n_samples:
            raise ValueError("replacement features must keep the column count")
        return replace(self, features=features)


@dataclass(frozen=True)
class SplitSpec:
    """Per-class training draw: ``per_class_train`` columns per class.

    ``seed`` drives the draw; ``trials`` is the repetition count used by
    the benchmark protocol (trial t uses seed + t).
    """

    per_class_train: int
    seed: int = 0
    trials: int = 1

    def __post_init__(self):
        if self.per_class_train < 1:
            raise ValueError("per_class_train must be >= 1")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")


def from_labeled_columns(
    features: np.ndarray, labels, require_multiclass: bool = False
) -> ClassPartitionedDataset:
    """Group sample columns by label (stable within each class)."""
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    if features.ndim != 2:
        raise ValueError("features must be 2-D (q, L)")
    if labels.shape[0] != features.shape[1]:
        raise CountMismatch(
            f"{features.shape[1]} feature columns but {labels.shape[0]} labels"
        )
    class_labels, codes = np.unique(labels, return_inverse=True)
    if require_multiclass and len(class_labels) < 2:
        raise SingleClass(f"need at least 2 classes, found {len(class_labels)}")
    order = np.argsort(codes, kind="stable")
    counts = np.bincount(codes, minlength=len(class_labels))
    return ClassPartitionedDataset(
        features=np.ascontiguousarray(features[:, order]),
        class_labels=class_labels,
        offsets=np.concatenate(([0], np.cumsum(counts))).astype(np.int64),
    )


def _open_maybe_gzip(path):
    f = open(path, "rb")
    head = f.read(2)
    f.seek(0)
    if head == b"\x1f\x8b":
        return gzip.open(f)
    return f


def _read_exact(f, n: int, path) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise TruncatedFile(f"{path}: expected {n} more bytes, got {len(data)}")
    return data


def _read_idx(path, expected_magic: int) -> np.ndarray:
    with _open_maybe_gzip(path) as f:
        (magic,) = struct.unpack(">i", _read_exact(f, 4, path))
        if magic != expected_magic:
            raise BadMagic(
                f"{path}: magic 0x{magic:08x}, expected 0x{expected_magic:08x}"
            )
        ndim = magic & 0xFF
        dims = struct.unpack(f">{ndim}i", _read_exact(f, 4 * ndim, path))
        payload = _read_exact(f, int(np.prod(dims)), path)
    return np.frombuffer(payload, dtype=np.uint8).reshape(dims)


def load_idx(images_path, labels_path) -> ClassPartitionedDataset:
    """Load an IDX image/label file pair (MNIST/USPS style, gzip ok).

    Each image is flattened column-major into one feature column; pixel
    values are scaled to [0, 1].
    """
    images = _read_idx(images_path, IDX_IMAGE_MAGIC)
    labels = _read_idx(labels_path, IDX_LABEL_MAGIC)
    if images.shape[0] != labels.shape[0]:
        raise CountMismatch(
            f"{images.shape[0]} images but {labels.shape[0]} labels"
        )
    n, rows, cols = images.shape
    # flatten each image column-major: features[:, i] = images[i].ravel(order="F")
    flat = images.transpose(0, 2, 1).reshape(n, rows * cols)
    features = flat.T.astype(np.float64) / 255.0
    return from_labeled_columns(features, labels.astype(np.int64),
                                require_multiclass=True)


def load_csv(path, label_column: str) -> ClassPartitionedDataset:
    """Load a headered CSV; rows become sample columns."""
    with open(path, "r", newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise TruncatedFile(f"{path}: empty file") from None
        if label_column not in header:
            raise NonNumericFeature(
                f"{path}: no column named {label_column!r} in header"
            )
        label_idx = header.index(label_column)
        rows, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise RaggedRows(
                    f"{path}:{lineno}: {len(row)} fields, header has {len(header)}"
                )
            labels.append(row[label_idx])
            cells = row[:label_idx] + row[label_idx + 1 :]
            try:
                values = [float(c) for c in cells]
            except ValueError:
                raise NonNumericFeature(
                    f"{path}:{lineno}: non-numeric feature value"
                ) from None
            if not all(np.isfinite(values)):
                raise NonNumericFeature(
                    f"{path}:{lineno}: non-finite feature value"
                )
            rows.append(values)
    if not rows:
        raise TruncatedFile(f"{path}: no data rows")
    features = np.asarray(rows, dtype=np.float64).T
    return from_labeled_columns(features, np.asarray(labels),
                                require_multiclass=True)


def save_csv(ds: ClassPartitionedDataset, path, label_column: str = "label") -> None:
    """Write a dataset in the load_csv format (one row per sample)."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow([f"f{i}" for i in range(ds.n_features)] + [label_column])
        labels = ds.column_labels
        for j in range(ds.n_samples):
            writer.writerow([repr(float(v)) for v in ds.features[:, j]]
                            + [str(labels[j])])


def normalize_matrix(features: np.ndarray) -> np.ndarray:
    """Scale every column of a raw feature matrix to unit norm."""
    norms = np.linalg.norm(features, axis=0)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ZeroColumn(f"column {zero[0]} has zero norm")
    return features / norms


def normalize_columns(ds: ClassPartitionedDataset) -> ClassPartitionedDataset:
    """Scale every sample column to unit Euclidean norm."""
    return ds.with_features(normalize_matrix(ds.features))


def draw_split(
    ds: ClassPartitionedDataset, spec: SplitSpec
) -> tuple[ClassPartitionedDataset, ClassPartitionedDataset]:
    """Seeded per-class draw of ``per_class_train`` columns.

    Returns (train, held_out); the held-out remainder may be empty when
    the draw exhausts every class. Identical seeds yield identical splits.
    """
    n = spec.per_class_train
    short = np.flatnonzero(ds.counts < n)
    if short.size:
        c = int(short[0])
        raise InsufficientSamples(
            f"class {ds.class_labels[c]!r} has {ds.counts[c]} samples, need {n}"
        )
    rng = np.random.default_rng(spec.seed)
    train_cols, rest_cols = [], []
    for c in range(ds.n_classes):
        lo, hi = int(ds.offsets[c]), int(ds.offsets[c + 1])
        picked = rng.choice(hi - lo, size=n, replace=False)
        mask = np.zeros(hi - lo, dtype=bool)
        mask[picked] = True
        train_cols.append(np.arange(lo, hi)[mask])
        rest_cols.append(np.arange(lo, hi)[~mask])
    train = ds.subset(np.concatenate(train_cols))
    held_out = ds.subset(np.concatenate(rest_cols))
    return train, held_out
