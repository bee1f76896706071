"""Supervised contrastive loss over action-labelled embeddings.

Numerics follow the reference PyTorch implementation line for line:
L2 row normalization, cosine logits divided by the temperature, per-row
max subtraction, self-contrast excluded from the denominator, ``eps``
inside the log, anchors without positives contributing 0, and a final
``temperature / base_temperature`` factor applied to the batch mean.
Everything here runs in float64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EPS = 1e-12
# Threshold on the (integer valued) positive count, kept as in the reference code.
POS_PAIR_THRESHOLD = 1e-6


@dataclass(frozen=True)
class LossParams:
    temperature: float = 0.07
    base_temperature: float = 0.07

    def __post_init__(self) -> None:
        for name in ("temperature", "base_temperature"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a positive finite number, got {value!r}")


def _check_inputs(embeddings, labels) -> tuple[np.ndarray, np.ndarray]:
    emb = np.asarray(embeddings, dtype=np.float64)
    if emb.ndim != 2:
        raise ValueError(f"embeddings must be [batch, width], got shape {emb.shape}")
    n, width = emb.shape
    if n < 2 or width < 1:
        raise ValueError(f"need at least 2 rows and 1 column, got shape {emb.shape}")
    if not np.all(np.isfinite(emb)):
        raise ValueError("embeddings contain non-finite values")
    labels = np.asarray(labels).reshape(-1)
    if labels.shape[0] != n:
        raise ValueError(f"{labels.shape[0]} labels for {n} embeddings")
    norms = np.sqrt(np.einsum("ij,ij->i", emb, emb))
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise ValueError(f"embedding row {int(zero[0])} has zero norm")
    return emb, labels


def positive_mask(labels) -> np.ndarray:
    """Float mask with 1 where labels match, excluding the diagonal."""
    labels = np.asarray(labels).reshape(-1)
    if labels.shape[0] < 2:
        raise ValueError("positive mask needs at least 2 labels")
    mask = (labels[:, None] == labels[None, :]).astype(np.float64)
    np.fill_diagonal(mask, 0.0)
    return mask


def _forward_terms(emb: np.ndarray, labels: np.ndarray, params: LossParams):
    norms = np.sqrt(np.einsum("ij,ij->i", emb, emb))
    unit = emb / norms[:, None]
    logits = unit @ unit.T / params.temperature
    logits = logits - logits.max(axis=1, keepdims=True)
    logits_mask = np.ones_like(logits)
    np.fill_diagonal(logits_mask, 0.0)
    mask = positive_mask(labels)
    exp_logits = np.exp(logits) * logits_mask
    denom = exp_logits.sum(axis=1, keepdims=True) + EPS
    log_prob = logits - np.log(denom)
    pos_count = mask.sum(axis=1)
    divisor = np.where(pos_count < POS_PAIR_THRESHOLD, 1.0, pos_count)
    mean_log_prob_pos = (mask * log_prob).sum(axis=1) / divisor
    per_anchor = -(params.temperature / params.base_temperature) * mean_log_prob_pos
    return per_anchor, unit, norms, mask, exp_logits / denom, divisor


def supcon_per_anchor(embeddings, labels, params: LossParams = LossParams()) -> np.ndarray:
    """Per-anchor loss terms; the loss is their mean."""
    emb, labels = _check_inputs(embeddings, labels)
    return _forward_terms(emb, labels, params)[0]


def supcon_forward(embeddings, labels, params: LossParams = LossParams()) -> float:
    emb, labels = _check_inputs(embeddings, labels)
    return float(np.mean(_forward_terms(emb, labels, params)[0]))


def supcon_loss_and_grad(embeddings, labels, params: LossParams = LossParams()) -> tuple[float, np.ndarray]:
    """Loss and its gradient with respect to the un-normalized embeddings.

    The row max is treated as a constant, as the reference code detaches it.
    It equals the self-similarity ``1 / temperature`` anyway.
    """
    emb, labels = _check_inputs(embeddings, labels)
    per_anchor, unit, norms, mask, weights, divisor = _forward_terms(emb, labels, params)
    loss = float(np.mean(per_anchor))
    n = emb.shape[0]
    scale = params.temperature / params.base_temperature
    has_pos = (mask.sum(axis=1) >= POS_PAIR_THRESHOLD).astype(np.float64)
    # d loss / d logit_ij; self-entries of weights and mask are already zero
    g_logits = (scale / n) * (has_pos[:, None] * weights - mask / divisor[:, None])
    g_unit = (g_logits + g_logits.T) @ unit / params.temperature
    radial = np.einsum("ij,ij->i", unit, g_unit)
    grad = (g_unit - unit * radial[:, None]) / norms[:, None]
    return loss, grad


def supcon_backward(embeddings, labels, params: LossParams = LossParams()) -> np.ndarray:
    return supcon_loss_and_grad(embeddings, labels, params)[1]


def supcon_oracle(embeddings, labels, params: LossParams = LossParams()) -> float:
    """Plain-loop reference evaluation, for tests only (N <= 128).

    Walks every anchor, its positives and its contrast set explicitly,
    with the same max shift, eps and scaling as the vectorized path.
    """
    emb, labels = _check_inputs(embeddings, labels)
    n, width = emb.shape
    if n > 128:
        raise ValueError("oracle is limited to batches of at most 128 rows")
    rows = [[float(x) for x in row] for row in emb]
    unit = []
    for row in rows:
        norm = math.sqrt(sum(x * x for x in row))
        unit.append([x / norm for x in row])

    def sim(i: int, j: int) -> float:
        return sum(unit[i][k] * unit[j][k] for k in range(width)) / params.temperature

    total = 0.0
    for i in range(n):
        shift = max(sim(i, j) for j in range(n))
        contrast = [a for a in range(n) if a != i]
        positives = [p for p in contrast if labels[p] == labels[i]]
        if not positives:
            continue
        denom = sum(math.exp(sim(i, a) - shift) for a in contrast) + EPS
        log_denom = math.log(denom)
        acc = 0.0
        for p in positives:
            acc += (sim(i, p) - shift) - log_denom
        total += -acc / len(positives)
    return (params.temperature / params.base_temperature) * total / n
