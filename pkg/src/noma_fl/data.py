"""Dataset ingestion and partitioning across devices.

Two sources: IDX image/label files (the MNIST family format: big-endian
magic, dimension sizes, raw unsigned bytes) and a seeded synthetic
Gaussian-blob generator for fast runs. Samples are split uniformly at
random into near-equal device shards.
"""

import gzip
import struct
from pathlib import Path

import numpy as np

IMAGE_MAGIC = 2051
LABEL_MAGIC = 2049


class IdxFormatError(ValueError):
    """Malformed IDX file."""


def _open_maybe_gzip(path: Path):
    if str(path).endswith(".gz"):
        return gzip.open(path, "rb")
    return open(path, "rb")


def load_idx_images(path) -> np.ndarray:
    """Parse an IDX image file into float rows scaled to [0, 1]."""
    path = Path(path)
    with _open_maybe_gzip(path) as f:
        header = f.read(16)
        if len(header) != 16:
            raise IdxFormatError(f"{path}: truncated header")
        magic, count, rows, cols = struct.unpack(">IIII", header)
        if magic != IMAGE_MAGIC:
            raise IdxFormatError(f"{path}: bad image magic {magic}, expected {IMAGE_MAGIC}")
        raw = f.read(count * rows * cols)
        if len(raw) != count * rows * cols:
            raise IdxFormatError(f"{path}: expected {count * rows * cols} pixels, got {len(raw)}")
        pixels = np.frombuffer(raw, dtype=np.uint8).reshape(count, rows * cols)
    return pixels.astype(np.float64) / 255.0


def load_idx_labels(path) -> np.ndarray:
    """Parse an IDX label file into an int vector."""
    path = Path(path)
    with _open_maybe_gzip(path) as f:
        header = f.read(8)
        if len(header) != 8:
            raise IdxFormatError(f"{path}: truncated header")
        magic, count = struct.unpack(">II", header)
        if magic != LABEL_MAGIC:
            raise IdxFormatError(f"{path}: bad label magic {magic}, expected {LABEL_MAGIC}")
        raw = f.read(count)
        if len(raw) != count:
            raise IdxFormatError(f"{path}: expected {count} labels, got {len(raw)}")
    return np.frombuffer(raw, dtype=np.uint8).astype(np.int64)


def load_idx_pair(image_path, label_path):
    """Images plus labels, with a size cross-check."""
    x = load_idx_images(image_path)
    y = load_idx_labels(label_path)
    if x.shape[0] != y.shape[0]:
        raise IdxFormatError(
            f"image/label count mismatch: {x.shape[0]} images vs {y.shape[0]} labels"
        )
    return x, y


def synthetic_blobs(
    rng: np.random.Generator,
    num_classes: int,
    samples_per_class: int,
    input_dim: int,
    spread: float = 1.0,
    center_scale: float = 3.0,
    centers: np.ndarray | None = None,
):
    """Balanced Gaussian clusters: one center per class, isotropic spread.

    Pass `centers` to draw a second split (e.g. a test set) of the same task.
    """
    if centers is None:
        centers = rng.standard_normal((num_classes, input_dim)) * center_scale
    x = np.vstack(
        [
            centers[c] + spread * rng.standard_normal((samples_per_class, input_dim))
            for c in range(num_classes)
        ]
    )
    y = np.repeat(np.arange(num_classes), samples_per_class)
    perm = rng.permutation(len(y))
    return x[perm], y[perm]


def partition_uniform(num_samples: int, num_devices: int, rng: np.random.Generator):
    """Disjoint near-equal shards (sizes differ by at most one) covering all samples."""
    if num_devices < 1:
        raise ValueError("num_devices must be >= 1")
    if num_samples < num_devices:
        raise ValueError("need at least one sample per device")
    perm = rng.permutation(num_samples)
    return [np.sort(part) for part in np.array_split(perm, num_devices)]
