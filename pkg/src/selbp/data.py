"""Dataset ingestion and synthesis: CSV files, Gaussian blobs, two moons."""

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    LabelOutOfRange,
    MalformedRow,
    NonNumericFeature,
)

DATASET_KINDS = ("csv", "blobs", "two_moons")


@dataclass
class DatasetDescriptor:
    kind: str = "blobs"
    # csv
    path: str = ""
    label_col: str = "label"
    feature_cols: tuple = ()  # empty = all non-label columns
    split: float = 0.8  # train fraction
    split_seed: int = 0
    # synthetic
    n: int = 3000
    classes: int = 3
    dim: int = 2
    separation: float = 4.0
    noise: float = 0.1  # two_moons jitter std
    seed: int = 0

    def __post_init__(self):
        if self.kind not in DATASET_KINDS:
            raise ValueError(f"unknown dataset kind {self.kind!r}")
        if not 0 < self.split < 1:
            raise ValueError(f"split must be in (0, 1), got {self.split}")
        if self.n < self.classes:
            raise ValueError("n must be at least the number of classes")
        self.feature_cols = tuple(self.feature_cols)


@dataclass
class Dataset:
    X_train: np.ndarray
    y_train: np.ndarray
    X_test: np.ndarray
    y_test: np.ndarray
    num_classes: int


def _split(X, y, num_classes, split, seed):
    rng = np.random.default_rng(seed)
    perm = rng.permutation(X.shape[0])
    n_train = int(round(split * X.shape[0]))
    tr, te = perm[:n_train], perm[n_train:]
    return Dataset(X[tr], y[tr], X[te], y[te], num_classes)


def _simplex_centers(classes, dim, side):
    """Class means with all pairwise distances equal to ``side``.

    Standard simplex construction in (classes - 1) dimensions, zero-padded
    to ``dim`` and centered at the origin.
    """
    if dim < classes - 1:
        raise DimensionMismatch(
            f"dim {dim} too small for {classes} equidistant class means"
        )
    k = classes
    verts = np.eye(k)  # pairwise distance sqrt(2)
    verts -= verts.mean(axis=0)
    # Project onto the (k-1)-dim subspace orthogonal to the all-ones vector.
    q, _ = np.linalg.qr(np.ones((k, 1)), mode="complete")
    basis = q[:, 1:]
    coords = verts @ basis  # (k, k-1), pairwise distance sqrt(2)
    coords *= side / np.sqrt(2.0)
    centers = np.zeros((k, dim))
    centers[:, : k - 1] = coords
    return centers


def synth_blobs(desc):
    """Isotropic unit-variance Gaussian clusters.

    ``separation`` is the pairwise class-mean distance in units of the
    within-class standard deviation. Class counts are balanced to within one.
    """
    rng = np.random.default_rng(desc.seed)
    centers = _simplex_centers(desc.classes, desc.dim, desc.separation)
    y = np.arange(desc.n) % desc.classes
    X = centers[y] + rng.standard_normal((desc.n, desc.dim))
    perm = rng.permutation(desc.n)
    X, y = X[perm], y[perm]
    return _split(X, y, desc.classes, desc.split, desc.split_seed)


def synth_two_moons(desc):
    """Two interleaving half-circles with Gaussian jitter; binary labels."""
    rng = np.random.default_rng(desc.seed)
    n0 = desc.n // 2
    n1 = desc.n - n0
    t0 = rng.uniform(0, np.pi, n0)
    t1 = rng.uniform(0, np.pi, n1)
    X0 = np.column_stack([np.cos(t0), np.sin(t0)])
    X1 = np.column_stack([1.0 - np.cos(t1), 0.5 - np.sin(t1)])
    X = np.concatenate([X0, X1]) + desc.noise * rng.standard_normal((desc.n, 2))
    y = np.concatenate([np.zeros(n0, dtype=np.intp), np.ones(n1, dtype=np.intp)])
    perm = rng.permutation(desc.n)
    return _split(X[perm], y[perm], 2, desc.split, desc.split_seed)


def ingest_csv(desc):
    """Load a labeled CSV: numeric features, non-negative integer labels.

    Features are standardized per column using train-split statistics only;
    constant columns map to all-zero (variance guard 1e-12). The train/test
    split is seeded and reproducible.
    """
    with open(desc.path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if desc.label_col not in header:
            raise MalformedRow(f"label column {desc.label_col!r} not in header")
        label_idx = header.index(desc.label_col)
        if desc.feature_cols:
            missing = [c for c in desc.feature_cols if c not in header]
            if missing:
                raise MalformedRow(f"feature columns not in header: {missing}")
            feat_idx = [header.index(c) for c in desc.feature_cols]
        else:
            feat_idx = [i for i in range(len(header)) if i != label_idx]

        rows, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise MalformedRow(
                    f"line {lineno}: expected {len(header)} fields, got {len(row)}"
                )
            try:
                rows.append([float(row[i]) for i in feat_idx])
            except ValueError as exc:
                raise NonNumericFeature(f"line {lineno}: {exc}") from exc
            try:
                lab = int(row[label_idx])
            except ValueError as exc:
                raise LabelOutOfRange(f"line {lineno}: {exc}") from exc
            if lab < 0:
                raise LabelOutOfRange(f"line {lineno}: negative label {lab}")
            labels.append(lab)

    X = np.array(rows, dtype=np.float64)
    y = np.array(labels, dtype=np.intp)
    num_classes = int(y.max()) + 1
    ds = _split(X, y, num_classes, desc.split, desc.split_seed)

    mean = ds.X_train.mean(axis=0)
    std = ds.X_train.std(axis=0)
    std = np.where(std < 1e-12, 1.0, std)
    ds.X_train = (ds.X_train - mean) / std
    ds.X_test = (ds.X_test - mean) / std
    return ds


def build_dataset(desc):
    if desc.kind == "csv":
        return ingest_csv(desc)
    if desc.kind == "blobs":
        return synth_blobs(desc)
    return synth_two_moons(desc)


def write_dataset_csv(desc, path):
    """Materialize a synthetic dataset (train and test concatenated) as CSV."""
    ds = build_dataset(desc)
    X = np.concatenate([ds.X_train, ds.X_test])
    y = np.concatenate([ds.y_train, ds.y_test])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i}" for i in range(X.shape[1])] + ["label"])
        for xi, yi in zip(X, y):
            writer.writerow([repr(float(v)) for v in xi] + [int(yi)])
