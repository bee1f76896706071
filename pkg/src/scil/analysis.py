"""Embedding-space diagnostics: silhouette, class cosine stats, PCA."""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from typing import Optional

import numpy as np


def _unit_rows(embeddings) -> np.ndarray:
    emb = np.asarray(embeddings, dtype=np.float64)
    if emb.ndim != 2:
        raise ValueError(f"embeddings must be 2-D, got shape {emb.shape}")
    norms = np.linalg.norm(emb, axis=1)
    if np.any(norms == 0):
        raise ValueError(f"embedding row {int(np.flatnonzero(norms == 0)[0])} has zero norm")
    return emb / norms[:, None]


def cosine_distances(embeddings) -> np.ndarray:
    unit = _unit_rows(embeddings)
    return np.clip(1.0 - unit @ unit.T, 0.0, 2.0)


def silhouette_samples(embeddings, labels) -> np.ndarray:
    labels = np.asarray(labels).reshape(-1)
    dist = cosine_distances(embeddings)
    n = dist.shape[0]
    if labels.shape[0] != n:
        raise ValueError(f"{labels.shape[0]} labels for {n} embeddings")
    classes, inverse, counts = np.unique(labels, return_inverse=True, return_counts=True)
    if classes.size < 2:
        raise ValueError("silhouette undefined for one cluster")
    if n < 3:
        raise ValueError("silhouette needs at least 3 points")
    onehot = np.zeros((n, classes.size))
    onehot[np.arange(n), inverse] = 1.0
    # mean distance from each point to each cluster
    sums = dist @ onehot
    own = counts[inverse]
    a = sums[np.arange(n), inverse] / np.maximum(own - 1, 1)
    others = sums / counts[None, :]
    others[np.arange(n), inverse] = np.inf
    b = others.min(axis=1)
    denom = np.maximum(a, b)
    s = np.where(denom > 0, (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
    s[own == 1] = 0.0
    return s


def silhouette(embeddings, labels) -> float:
    """Mean silhouette coefficient under cosine distance."""
    return float(silhouette_samples(embeddings, labels).mean())


def pca_project(embeddings, k: int = 2) -> np.ndarray:
    """Project onto the top-k principal components.

    Components are sorted by decreasing variance and each is signed so its
    largest-magnitude loading is positive.  Directions with (numerically)
    zero variance give zero coordinates.
    """
    x = np.asarray(embeddings, dtype=np.float64)
    n, width = x.shape
    if n < k:
        raise ValueError(f"need at least k={k} rows, got {n}")
    centered = x - x.mean(axis=0)
    cov = centered.T @ centered / max(n - 1, 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(-evals, kind="stable")
    evals, evecs = evals[order], evecs[:, order]
    tol = max(n, width) * np.finfo(np.float64).eps * max(evals[0], 0.0)
    out = np.zeros((n, k))
    for c in range(min(k, width)):
        if evals[c] <= tol or evals[c] <= 0:
            continue
        v = evecs[:, c]
        if v[np.argmax(np.abs(v))] < 0:
            v = -v
        out[:, c] = centered @ v
    return out


def class_cosine_stats(embeddings, labels) -> tuple[Optional[float], Optional[float]]:
    """Mean cosine similarity over same-label and different-label pairs (i < j).

    Either value is None when its pair set is empty.
    """
    unit = _unit_rows(embeddings)
    labels = np.asarray(labels).reshape(-1)
    if unit.shape[0] < 2:
        raise ValueError("need at least 2 embeddings")
    sims = unit @ unit.T
    iu = np.triu_indices(unit.shape[0], k=1)
    same = (labels[:, None] == labels[None, :])[iu]
    pair_sims = sims[iu]
    intra = float(pair_sims[same].mean()) if same.any() else None
    inter = float(pair_sims[~same].mean()) if (~same).any() else None
    return intra, inter


@dataclass
class EmbeddingReport:
    silhouette: float
    intra_class_cosine_mean: Optional[float]
    inter_class_cosine_mean: Optional[float]
    class_counts: dict[int, int]
    projection: np.ndarray

    def scalars(self) -> dict:
        return {
            "silhouette": self.silhouette,
            "intra_class_cosine_mean": self.intra_class_cosine_mean,
            "inter_class_cosine_mean": self.inter_class_cosine_mean,
            "n_points": int(self.projection.shape[0]),
            "n_classes": len(self.class_counts),
            "projection": "pca",
        }


def embedding_report(embeddings, labels) -> EmbeddingReport:
    labels = np.asarray(labels).reshape(-1)
    intra, inter = class_cosine_stats(embeddings, labels)
    counts = Counter(int(x) for x in labels)
    return EmbeddingReport(
        silhouette=silhouette(embeddings, labels),
        intra_class_cosine_mean=intra,
        inter_class_cosine_mean=inter,
        class_counts=dict(sorted(counts.items())),
        projection=pca_project(embeddings, 2),
    )


def write_embedding_report_csv(path, report: EmbeddingReport, labels) -> None:
    """Columns: ``index, label, pc1, pc2`` (one row per embedding)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "label", "pc1", "pc2"])
        for i, (label, (x, y)) in enumerate(zip(np.asarray(labels).reshape(-1), report.projection)):
            writer.writerow([i, int(label), repr(float(x)), repr(float(y))])


def write_summary(path, values: dict) -> None:
    """One ``key=value`` line per scalar, keys sorted; absent values as ``none``."""
    with open(path, "w") as fh:
        for key in sorted(values):
            value = values[key]
            fh.write(f"{key}={'none' if value is None else value}\n")


def read_summary(path) -> dict[str, str]:
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                key, _, value = line.partition("=")
                out[key] = value
    return out
