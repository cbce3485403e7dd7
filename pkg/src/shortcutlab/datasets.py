"""Dataset generators and ingestion.

Synthetic data comes in two flavours: whitened Gaussian columns with
round-robin one-hot targets (the training/Hessian protocol), and unit-norm
columns with distinct one-hot targets (what the exact-fit constructor
assumes). CSV ingestion reads "label, feature..." rows and whitens the
top principal components.
"""

from __future__ import annotations

import numpy as np

from .linalg import sym_eig
from .network import Dataset
from .rng import Rng


def _one_hot_round_robin(d: int, m: int) -> np.ndarray:
    y = np.zeros((d, m))
    for j in range(m):
        y[j % d, j] = 1.0
    return y


def whitened_synthetic_dataset(d: int, m: int, seed: int) -> Dataset:
    """Gaussian columns, mean-centred and whitened to unit sample covariance.

    Targets are one-hot columns assigned round-robin over the d classes.
    The sample covariance (1/m) X X^T of the output equals the identity to
    well below 1e-8. A rank-deficient draw is resampled (fresh stream
    continuation), at most 5 times.
    """
    if m < d:
        raise ValueError(f"need m >= d samples to whiten, got m={m} < d={d}")
    rng = Rng(seed)
    for _ in range(5):
        g = rng.normal_matrix(d, m)
        # centering m = d samples would drop the rank below d and make
        # whitening impossible, so it is skipped in that boundary case
        centered = g - g.mean(axis=1, keepdims=True) if m > d else g
        cov = centered @ centered.T / m
        dec = sym_eig(cov)
        evals = dec.eigenvalues
        if evals[0] <= 1e-12 * max(evals[-1], 1.0):
            continue
        white = (dec.eigenvectors / np.sqrt(evals)).T @ centered
        return Dataset(white, _one_hot_round_robin(d, m))
    raise RuntimeError("sample covariance stayed rank-deficient after 5 attempts")


def sphere_onehot_dataset(d: int, m: int, seed: int) -> Dataset:
    """Unit-norm random inputs with distinct one-hot targets (m <= d)."""
    if m > d:
        raise ValueError(f"distinct one-hot targets need m <= d, got m={m} > d={d}")
    rng = Rng(seed)
    x = rng.normal_matrix(d, m)
    norms = np.linalg.norm(x, axis=0)
    while np.any(norms < 1e-12):  # essentially never; keeps the division safe
        x = rng.normal_matrix(d, m)
        norms = np.linalg.norm(x, axis=0)
    x /= norms
    y = np.zeros((d, m))
    for j in range(m):
        y[j, j] = 1.0
    return Dataset(x, y)


class CsvFormatError(ValueError):
    """A data CSV row could not be parsed; carries the offending row number."""


def load_labeled_csv(path):
    """Read "label, feature..." rows; returns (labels, features (m x p))."""
    labels = []
    rows = []
    width = None
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) < 2:
                raise CsvFormatError(f"row {lineno}: expected 'label, feature...' fields")
            try:
                values = [float(p) for p in parts]
            except ValueError:
                raise CsvFormatError(f"row {lineno}: non-numeric field") from None
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise CsvFormatError(f"row {lineno}: expected {width} fields, got {len(values)}")
            labels.append(values[0])
            rows.append(values[1:])
    if not rows:
        raise CsvFormatError("no data rows found")
    return labels, np.asarray(rows)


def pca_whiten_csv(path, k: int = 10) -> Dataset:
    """Top-k PCA projection of a labelled CSV, whitened, labels one-hot.

    The output covariance (1/m convention) is the k x k identity. Labels
    are mapped to classes by sorted order of their distinct values; the
    number of classes must not exceed k because inputs and targets share
    the width k.
    """
    labels, feats = load_labeled_csv(path)
    m, p = feats.shape
    if p < k:
        raise ValueError(f"need at least k={k} features per row, got {p}")
    classes = sorted(set(labels))
    if len(classes) > k:
        raise ValueError(f"{len(classes)} distinct labels exceed the output width k={k}")
    index = {c: i for i, c in enumerate(classes)}

    centered = feats - feats.mean(axis=0, keepdims=True)
    cov = centered.T @ centered / m
    dec = sym_eig(cov)
    top = dec.eigenvalues[-k:][::-1]
    vecs = dec.eigenvectors[:, -k:][:, ::-1]
    if top[-1] <= 1e-12 * max(top[0], 1.0):
        raise ValueError(f"data rank below k={k}; cannot whiten the projection")
    x = (vecs / np.sqrt(top)).T @ centered.T
    y = np.zeros((k, m))
    for j, lab in enumerate(labels):
        y[index[lab], j] = 1.0
    return Dataset(x, y)
