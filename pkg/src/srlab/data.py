"""Dataset construction and ingestion.

Synthetic Gaussian blobs for fast experiments, IDX/CSV loaders for
MNIST-style data, per-class subsampling, the long-tailed / step imbalance
count profiles, and a stratified train/test split. Everything is
deterministic per seed.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

IDX_IMAGE_MAGIC = 2051
IDX_LABEL_MAGIC = 2049


class IdxFormatError(ValueError):
    """Malformed IDX file (bad magic, truncation, count mismatch)."""


@dataclass(frozen=True)
class LabeledDataset:
    """Feature matrix (N x d) with integer class labels in [0, k)."""

    features: np.ndarray
    labels: np.ndarray
    k: int
    name: str = ""

    def __post_init__(self):
        features = np.ascontiguousarray(self.features, dtype=np.float64)
        labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if features.ndim != 2:
            raise ValueError(f"features must be 2-D, got {features.shape}")
        if labels.ndim != 1 or labels.shape[0] != features.shape[0]:
            raise ValueError(
                f"labels shape {labels.shape} does not match {features.shape[0]} rows"
            )
        if labels.size and (labels.min() < 0 or labels.max() >= self.k):
            raise ValueError(f"labels must lie in [0, {self.k})")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)

    def replace_labels(self, labels, suffix: str = "") -> "LabeledDataset":
        return LabeledDataset(self.features, labels, self.k, self.name + suffix)


def gaussian_blobs(k: int, n_per_class: int, d: int, separation: float,
                   seed: int) -> LabeledDataset:
    """Isotropic Gaussian class clusters, z-scored per dimension.

    Class c is centered at separation times the unit direction
    (cos 2*pi*c/k, sin 2*pi*c/k, 0, ...) with identity covariance.
    """
    if k < 2 or d < 2 or n_per_class < 1:
        raise ValueError(f"invalid sizes: k={k}, d={d}, n_per_class={n_per_class}")
    if separation < 0.0:
        raise ValueError(f"separation must be nonnegative, got {separation}")
    rng = np.random.default_rng(seed)
    centers = np.zeros((k, d))
    angles = 2.0 * np.pi * np.arange(k) / k
    centers[:, 0] = np.cos(angles)
    centers[:, 1] = np.sin(angles)
    centers *= separation
    features = rng.standard_normal((k * n_per_class, d))
    labels = np.repeat(np.arange(k), n_per_class)
    features += centers[labels]
    mean = features.mean(axis=0)
    std = np.maximum(features.std(axis=0), 1e-12)
    features = (features - mean) / std
    return LabeledDataset(features, labels, k, name=f"blobs-k{k}-d{d}")


def _read_exact(fh, count: int, path, what: str) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise IdxFormatError(
            f"{path}: truncated while reading {what}: expected {count} bytes, "
            f"got {len(data)}"
        )
    return data


def load_idx(images_path, labels_path) -> LabeledDataset:
    """Load an IDX image/label pair (big-endian, magics 2051/2049).

    Pixels are scaled to [0, 1]; image and label counts must agree.
    """
    with open(images_path, "rb") as fh:
        magic, n, rows, cols = struct.unpack(">IIII",
                                             _read_exact(fh, 16, images_path, "header"))
        if magic != IDX_IMAGE_MAGIC:
            raise IdxFormatError(
                f"{images_path}: bad magic {magic}, expected {IDX_IMAGE_MAGIC}"
            )
        raw = _read_exact(fh, n * rows * cols, images_path, f"{n} images")
        pixels = np.frombuffer(raw, dtype=np.uint8).reshape(n, rows * cols)
    with open(labels_path, "rb") as fh:
        magic, n_labels = struct.unpack(">II",
                                        _read_exact(fh, 8, labels_path, "header"))
        if magic != IDX_LABEL_MAGIC:
            raise IdxFormatError(
                f"{labels_path}: bad magic {magic}, expected {IDX_LABEL_MAGIC}"
            )
        labels = np.frombuffer(_read_exact(fh, n_labels, labels_path,
                                           f"{n_labels} labels"), dtype=np.uint8)
    if n_labels != n:
        raise IdxFormatError(
            f"count mismatch: {n} images vs {n_labels} labels"
        )
    if labels.size and labels.max() > 9:
        raise IdxFormatError(
            f"{labels_path}: label {labels.max()} exceeds 9 (IDX digit labels)"
        )
    return LabeledDataset(pixels / 255.0, labels.astype(np.int64), 10, name="idx")


def write_idx(images_path, labels_path, images: np.ndarray,
              labels: np.ndarray) -> None:
    """Write a uint8 IDX pair (images (N, rows, cols), labels (N,))."""
    images = np.ascontiguousarray(images, dtype=np.uint8)
    labels = np.ascontiguousarray(labels, dtype=np.uint8)
    if images.ndim != 3 or labels.ndim != 1 or images.shape[0] != labels.shape[0]:
        raise ValueError("expected images (N, rows, cols) and labels (N,)")
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGE_MAGIC, *images.shape))
        fh.write(images.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", IDX_LABEL_MAGIC, labels.shape[0]))
        fh.write(labels.tobytes())


def load_csv(path, k: int | None = None) -> LabeledDataset:
    """Headerless CSV: first column integer label, rest real features."""
    table = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    labels = table[:, 0]
    ints = labels.astype(np.int64)
    if np.any(labels != ints):
        raise ValueError(f"{path}: first column must contain integer labels")
    if k is None:
        k = int(ints.max()) + 1
    return LabeledDataset(table[:, 1:], ints, k, name="csv")


def subsample_per_class(ds: LabeledDataset, counts, seed: int) -> LabeledDataset:
    """Uniform without-replacement draw of counts[c] samples per class."""
    counts = np.asarray(counts, dtype=np.int64)
    if counts.shape != (ds.k,):
        raise ValueError(f"expected {ds.k} per-class targets, got {counts.shape}")
    available = ds.class_counts()
    rng = np.random.default_rng(seed)
    keep = []
    for c in range(ds.k):
        idx = np.flatnonzero(ds.labels == c)
        if counts[c] > available[c]:
            raise ValueError(
                f"class {c}: requested {counts[c]} of {available[c]} available"
            )
        keep.append(rng.permutation(idx)[: counts[c]])
    keep = np.concatenate(keep) if keep else np.empty(0, dtype=np.int64)
    return LabeledDataset(ds.features[keep], ds.labels[keep], ds.k,
                          ds.name + "-sub")


def long_tailed_counts(n_max: int, mu: float, k: int) -> np.ndarray:
    """Exponential profile: count_c = round(n_max * mu^(c/(k-1))).

    mu is the minority/majority ratio: class 0 gets n_max, class k-1 gets
    n_max * mu.
    """
    if not 0.0 < mu <= 1.0:
        raise ValueError(f"mu must be in (0, 1], got {mu}")
    if k == 1:
        return np.array([n_max], dtype=np.int64)
    exponents = np.arange(k) / (k - 1)
    return np.rint(n_max * mu ** exponents).astype(np.int64)


def step_counts(n_max: int, mu: float, k: int,
                minority_fraction: float) -> np.ndarray:
    """Two-level profile: the last ceil(k * fraction) classes get n_max * mu."""
    if not 0.0 < mu <= 1.0:
        raise ValueError(f"mu must be in (0, 1], got {mu}")
    if not 0.0 < minority_fraction < 1.0:
        raise ValueError(
            f"minority_fraction must be in (0, 1), got {minority_fraction}"
        )
    n_minority = math.ceil(k * minority_fraction)
    counts = np.full(k, n_max, dtype=np.int64)
    counts[k - n_minority:] = int(round(n_max * mu))
    return counts


def split(ds: LabeledDataset, test_fraction: float, seed: int):
    """Stratified disjoint train/test split; deterministic per seed."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for c in range(ds.k):
        idx = np.flatnonzero(ds.labels == c)
        if idx.size < 2:
            raise ValueError(f"class {c} has {idx.size} samples; need at least 2")
        perm = rng.permutation(idx)
        n_test = int(round(test_fraction * idx.size))
        n_test = min(max(n_test, 1), idx.size - 1)
        test_idx.append(perm[:n_test])
        train_idx.append(perm[n_test:])
    train_idx = np.concatenate(train_idx)
    test_idx = np.concatenate(test_idx)
    train = LabeledDataset(ds.features[train_idx], ds.labels[train_idx], ds.k,
                           ds.name + "-train")
    test = LabeledDataset(ds.features[test_idx], ds.labels[test_idx], ds.k,
                          ds.name + "-test")
    return train, test
