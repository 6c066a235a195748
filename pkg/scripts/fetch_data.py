#!/usr/bin/env python3
"""Download MNIST and USPS into the layout the benchmarks expect.

Usage: python scripts/fetch_data.py [DATA_DIR]

DATA_DIR defaults to ./data (or $LDSR_DATA_DIR). Produces:

    DATA_DIR/mnist/train-images-idx3-ubyte.gz   (and the other 3 files)
    DATA_DIR/usps/train-images-idx3-ubyte.gz    (converted to IDX)
    DATA_DIR/usps/t10k-images-idx3-ubyte.gz

MNIST comes as IDX directly. USPS is published in libsvm format
(16x16 grayscale in [-1, 1]); it is rescaled to bytes and rewritten as
IDX so both datasets load through the same path.
"""

import bz2
import gzip
import os
import struct
import sys
import urllib.request
from pathlib import Path

MNIST_BASE = "https://ossci-datasets.s3.amazonaws.com/mnist"
MNIST_FILES = [
    "train-images-idx3-ubyte.gz",
    "train-labels-idx1-ubyte.gz",
    "t10k-images-idx3-ubyte.gz",
    "t10k-labels-idx1-ubyte.gz",
]
USPS_BASE = "https://www.csie.ntu.edu.tw/~cjlin/libsvmtools/datasets/multiclass"
USPS_FILES = {"usps.bz2": "train", "usps.t.bz2": "t10k"}


def download(url, dest: Path):
    if dest.exists():
        print(f"  already present: {dest}")
        return
    print(f"  fetching {url}")
    tmp = dest.with_suffix(dest.suffix + ".part")
    with urllib.request.urlopen(url) as r, open(tmp, "wb") as f:
        f.write(r.read())
    tmp.rename(dest)


def parse_libsvm(data: bytes, dim: int):
    """Dense (n, dim) float array + labels from libsvm lines."""
    rows, labels = [], []
    for line in data.decode("ascii").strip().split("\n"):
        parts = line.split()
        labels.append(int(float(parts[0])))
        row = [0.0] * dim
        for item in parts[1:]:
            idx, val = item.split(":")
            row[int(idx) - 1] = float(val)
        rows.append(row)
    return rows, labels


def write_idx_pair(prefix: Path, rows, labels, side: int):
    n = len(rows)
    images = bytearray()
    for row in rows:
        # libsvm USPS values lie in [-1, 1]; map to 0..255
        images.extend(
            max(0, min(255, int(round((v + 1.0) * 127.5)))) for v in row
        )
    img_path = prefix.parent / f"{prefix.name}-images-idx3-ubyte.gz"
    lab_path = prefix.parent / f"{prefix.name}-labels-idx1-ubyte.gz"
    with gzip.open(img_path, "wb") as f:
        f.write(struct.pack(">iiii", 0x00000803, n, side, side))
        f.write(bytes(images))
    with gzip.open(lab_path, "wb") as f:
        f.write(struct.pack(">ii", 0x00000801, n))
        # USPS labels are 1..10 meaning digits 1..9,0
        f.write(bytes((v % 10) for v in labels))
    print(f"  wrote {img_path} ({n} samples)")


def fetch_mnist(root: Path):
    out = root / "mnist"
    out.mkdir(parents=True, exist_ok=True)
    print("MNIST:")
    for name in MNIST_FILES:
        download(f"{MNIST_BASE}/{name}", out / name)


def fetch_usps(root: Path):
    out = root / "usps"
    out.mkdir(parents=True, exist_ok=True)
    print("USPS:")
    for name, prefix in USPS_FILES.items():
        raw = out / name
        download(f"{USPS_BASE}/{name}", raw)
        rows, labels = parse_libsvm(bz2.decompress(raw.read_bytes()), 256)
        write_idx_pair(out / prefix, rows, labels, side=16)


def main():
    root = Path(
        sys.argv[1]
        if len(sys.argv) > 1
        else os.environ.get("LDSR_DATA_DIR", "data")
    )
    fetch_mnist(root)
    fetch_usps(root)
    print(f"done; point LDSR_DATA_DIR at {root.resolve()}")


if __name__ == "__main__":
    main()
