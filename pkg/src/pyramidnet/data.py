"""Dataset ingestion: IDX parsing, class filtering, PCA, normalization.

MNIST is read from its published IDX container format (big-endian,
magic 2051 for image files and 2049 for label files). Nothing here
downloads data; the CLI documents where to place the files.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .linalg import eigh

DATA_DIR_ENV = "PYRAMIDNET_DATA_DIR"
IMAGE_MAGIC = 2051
LABEL_MAGIC = 2049

MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}


class IdxFormatError(ValueError):
    """Malformed IDX payload."""


class BadMagicError(IdxFormatError):
    pass


class TruncatedFileError(IdxFormatError):
    pass


class CountMismatchError(IdxFormatError):
    pass


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {self.features.shape}")
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError(
                f"{self.features.shape[0]} rows but {self.labels.shape[0]} labels"
            )

    def __len__(self) -> int:
        return self.features.shape[0]

    def take(self, k: int) -> "Dataset":
        return Dataset(self.features[:k], self.labels[:k])


@dataclass
class PCAModel:
    mean: np.ndarray
    components: np.ndarray  # k x dims, orthonormal rows


def _read_exact(fh, count: int, path) -> bytes:
    buf = fh.read(count)
    if len(buf) != count:
        raise TruncatedFileError(f"{path}: expected {count} more bytes, got {len(buf)}")
    return buf


def parse_idx(images_path, labels_path) -> Dataset:
    """Read an IDX image/label file pair; pixels are scaled to [0, 1]."""
    with open(images_path, "rb") as fh:
        magic, count, rows, cols = struct.unpack(">IIII", _read_exact(fh, 16, images_path))
        if magic != IMAGE_MAGIC:
            raise BadMagicError(f"{images_path}: magic {magic}, expected {IMAGE_MAGIC}")
        pixels = np.frombuffer(
            _read_exact(fh, count * rows * cols, images_path), dtype=np.uint8
        )
    with open(labels_path, "rb") as fh:
        magic, label_count = struct.unpack(">II", _read_exact(fh, 8, labels_path))
        if magic != LABEL_MAGIC:
            raise BadMagicError(f"{labels_path}: magic {magic}, expected {LABEL_MAGIC}")
        labels = np.frombuffer(_read_exact(fh, label_count, labels_path), dtype=np.uint8)
    if count != label_count:
        raise CountMismatchError(f"{count} images but {label_count} labels")
    features = pixels.reshape(count, rows * cols).astype(np.float64) / 255.0
    return Dataset(features, labels.astype(np.int64))


def filter_classes(ds: Dataset, classes) -> Dataset:
    """Keep only the given labels, remapped to 0..k-1 in ascending order."""
    wanted = sorted(set(int(c) for c in classes))
    keep = np.isin(ds.labels, wanted)
    if not np.any(keep):
        raise ValueError(f"no samples with labels {wanted}")
    remap = {c: i for i, c in enumerate(wanted)}
    labels = np.array([remap[int(l)] for l in ds.labels[keep]], dtype=np.int64)
    return Dataset(ds.features[keep], labels)


def pca_fit(ds: Dataset, k: int) -> PCAModel:
    """Top-k principal components of the mean-centered covariance."""
    m, dims = ds.features.shape
    if not 1 <= k <= dims:
        raise ValueError(f"k must be in [1, {dims}], got {k}")
    if k > m:
        raise ValueError(f"k={k} exceeds the {m} available samples")
    mean = ds.features.mean(axis=0)
    centered = ds.features - mean
    cov = (centered.T @ centered) / max(m - 1, 1)
    _, vecs = eigh(cov)
    components = vecs[:, :k].T.copy()
    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return PCAModel(mean, components)


def pca_transform(model: PCAModel, ds: Dataset) -> Dataset:
    return Dataset((ds.features - model.mean) @ model.components.T, ds.labels)


def normalize_rows(ds: Dataset) -> Dataset:
    """Scale every row to unit Euclidean norm."""
    norms = np.linalg.norm(ds.features, axis=1)
    zero = np.flatnonzero(norms < 1e-300)
    if zero.size:
        raise ValueError(f"cannot normalize zero rows at indices {zero.tolist()}")
    return Dataset(ds.features / norms[:, None], ds.labels)


def synth_blobs(n_per_class: int, dims: int, separation: float, seed: int = 0) -> Dataset:
    """Two unit-variance Gaussian blobs at +-separation/2 along axis 0."""
    if n_per_class < 1:
        raise ValueError("n_per_class must be positive")
    if dims < 1:
        raise ValueError("dims must be positive")
    rng = np.random.default_rng(seed)
    offset = np.zeros(dims)
    offset[0] = separation / 2.0
    lo = rng.normal(size=(n_per_class, dims)) - offset
    hi = rng.normal(size=(n_per_class, dims)) + offset
    features = np.vstack([lo, hi])
    labels = np.concatenate([np.zeros(n_per_class), np.ones(n_per_class)])
    return Dataset(features, labels)


def default_data_dir() -> Path:
    return Path(os.environ.get(DATA_DIR_ENV, "data"))


def find_mnist(data_dir=None) -> dict[str, Path] | None:
    """Paths of the four MNIST files if they all exist, else None."""
    base = Path(data_dir) if data_dir is not None else default_data_dir()
    paths = {key: base / name for key, name in MNIST_FILES.items()}
    if all(p.exists() for p in paths.values()):
        return paths
    return None


def load_mnist_split(
    data_dir=None,
    classes=(6, 9),
    pca_k: int = 4,
    train_n: int = 5000,
    test_n: int = 1000,
) -> tuple[Dataset, Dataset]:
    """Filtered, PCA-reduced, row-normalized MNIST train/test split.

    Takes the first matching samples in file order; PCA is fitted on
    the training split only.
    """
    paths = find_mnist(data_dir)
    if paths is None:
        base = Path(data_dir) if data_dir is not None else default_data_dir()
        raise FileNotFoundError(f"MNIST IDX files not found under {base}")
    train = filter_classes(
        parse_idx(paths["train_images"], paths["train_labels"]), classes
    ).take(train_n)
    test = filter_classes(
        parse_idx(paths["test_images"], paths["test_labels"]), classes
    ).take(test_n)
    model = pca_fit(train, pca_k)
    return (
        normalize_rows(pca_transform(model, train)),
        normalize_rows(pca_transform(model, test)),
    )
