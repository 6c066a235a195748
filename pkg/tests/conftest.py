import struct

import numpy as np
import pytest

from ldsr.dataset import from_labeled_columns


def make_dataset(rng, q, counts):
    """Random dataset with the given per-class sample counts."""
    labels = np.repeat(np.arange(len(counts)), counts)
    return from_labeled_columns(rng.standard_normal((q, len(labels))), labels)


def gaussian_blobs(rng, means, n_per_class, noise):
    """Columns drawn around the given mean vectors (one class per mean)."""
    q = means.shape[0]
    cols, labels = [], []
    for c in range(means.shape[1]):
        cols.append(means[:, [c]] + noise * rng.standard_normal((q, n_per_class)))
        labels.extend([c] * n_per_class)
    return from_labeled_columns(np.hstack(cols), np.asarray(labels))


def write_idx_images(path, images):
    """images: (n, rows, cols) uint8."""
    n, rows, cols = images.shape
    with open(path, "wb") as f:
        f.write(struct.pack(">iiii", 0x00000803, n, rows, cols))
        f.write(np.asarray(images, dtype=np.uint8).tobytes())


def write_idx_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">ii", 0x00000801, len(labels)))
        f.write(np.asarray(labels, dtype=np.uint8).tobytes())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
