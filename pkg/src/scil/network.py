"""Fully connected feature extractor with per-action-dimension policy heads.

observation -> [Linear -> ReLU] * k -> Linear (embedding) -> heads

The embedding is the raw output of the last extractor layer (no projection
head); the contrastive term acts there.  Each action dimension gets a
linear head on top of the embedding: logits for discrete dimensions, a
single regression output for continuous ones.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .labeling import ActionSpec, Continuous, Discrete
from .supcon import LossParams, supcon_forward, supcon_loss_and_grad

CHECKPOINT_FORMAT = "scil-checkpoint"
CHECKPOINT_VERSION = 1


def head_sizes(spec: ActionSpec) -> list[int]:
    return [d.cardinality if isinstance(d, Discrete) else 1 for d in spec.dims]


@dataclass
class NetworkParams:
    """Weights are stored (fan_in, fan_out) so a layer is ``x @ W + b``."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    head_weights: list[np.ndarray]
    head_biases: list[np.ndarray]
    spec: ActionSpec

    @property
    def obs_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def embed_dim(self) -> int:
        return self.weights[-1].shape[1]

    def arrays(self) -> list[np.ndarray]:
        """All parameter arrays in a fixed order (extractor, then heads)."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        for w, b in zip(self.head_weights, self.head_biases):
            out += [w, b]
        return out

    def with_arrays(self, arrays: Sequence[np.ndarray]) -> "NetworkParams":
        arrays = list(arrays)
        k, h = len(self.weights), len(self.head_weights)
        if len(arrays) != 2 * (k + h):
            raise ValueError("wrong number of parameter arrays")
        return NetworkParams(
            weights=arrays[0 : 2 * k : 2],
            biases=arrays[1 : 2 * k : 2],
            head_weights=arrays[2 * k :: 2],
            head_biases=arrays[2 * k + 1 :: 2],
            spec=self.spec,
        )

    def copy(self) -> "NetworkParams":
        return self.with_arrays([a.copy() for a in self.arrays()])

    def zeros_like(self) -> "NetworkParams":
        return self.with_arrays([np.zeros_like(a) for a in self.arrays()])


def init_params(
    obs_dim: int,
    hidden: Sequence[int],
    embed_dim: int,
    spec: ActionSpec,
    seed: int = 0,
) -> NetworkParams:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) init for weights and biases."""
    rng = np.random.default_rng(seed)
    sizes = [obs_dim, *hidden, embed_dim]
    if any(s < 1 for s in sizes):
        raise ValueError(f"layer sizes must be positive, got {sizes}")

    def layer(fan_in: int, fan_out: int) -> tuple[np.ndarray, np.ndarray]:
        bound = 1.0 / np.sqrt(fan_in)
        return (
            rng.uniform(-bound, bound, size=(fan_in, fan_out)),
            rng.uniform(-bound, bound, size=fan_out),
        )

    weights, biases = zip(*(layer(a, b) for a, b in zip(sizes[:-1], sizes[1:])))
    head_w, head_b = zip(*(layer(embed_dim, k) for k in head_sizes(spec)))
    return NetworkParams(list(weights), list(biases), list(head_w), list(head_b), spec)


@dataclass
class ForwardTrace:
    inputs: np.ndarray
    pre_activations: list[np.ndarray]
    activations: list[np.ndarray]
    head_outputs: list[np.ndarray]

    @property
    def embedding(self) -> np.ndarray:
        return self.activations[-1]


def forward(obs, params: NetworkParams) -> ForwardTrace:
    x = np.asarray(obs, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.obs_dim:
        raise ValueError(f"observation batch has shape {x.shape}, network expects (N, {params.obs_dim})")
    pre, acts = [], []
    h = x
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w + b
        h = z if i == last else np.maximum(z, 0.0)
        if not np.all(np.isfinite(h)):
            raise FloatingPointError(f"non-finite activation at extractor layer {i}")
        pre.append(z)
        acts.append(h)
    heads = []
    for i, (w, b) in enumerate(zip(params.head_weights, params.head_biases)):
        out = h @ w + b
        if not np.all(np.isfinite(out)):
            raise FloatingPointError(f"non-finite output at head {i}")
        heads.append(out)
    return ForwardTrace(x, pre, acts, heads)


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def predictive_loss(trace: ForwardTrace, actions, spec: ActionSpec) -> tuple[float, list[np.ndarray], list[float]]:
    """Sum of per-head losses: cross-entropy (discrete) and MSE (continuous).

    Returns the total, the gradient w.r.t. each head output, and the
    per-head loss values.  Both losses are means over the batch.
    """
    actions = np.asarray(actions, dtype=np.float64)
    if actions.ndim == 1:
        actions = actions[:, None]
    n = trace.inputs.shape[0]
    if actions.shape != (n, len(spec)):
        raise ValueError(f"actions have shape {actions.shape}, expected ({n}, {len(spec)})")
    total = 0.0
    grads, per_head = [], []
    for d, (dim, out) in enumerate(zip(spec.dims, trace.head_outputs)):
        target = actions[:, d]
        if isinstance(dim, Discrete):
            idx = np.rint(target).astype(np.int64)
            if np.any(idx != target) or np.any(idx < 0) or np.any(idx >= dim.cardinality):
                raise ValueError(f"head {d}: labels outside [0, {dim.cardinality - 1}]")
            logp = _log_softmax(out)
            loss = float(-logp[np.arange(n), idx].mean())
            g = np.exp(logp)
            g[np.arange(n), idx] -= 1.0
            g /= n
        else:
            resid = out[:, 0] - target
            loss = float(np.mean(resid**2))
            g = (2.0 / n) * resid[:, None]
        total += loss
        grads.append(g)
        per_head.append(loss)
    return total, grads, per_head


@dataclass
class CombinedLossReport:
    pred_loss: float
    supcon_loss: float
    total: float
    lam: float
    head_losses: list[float] = field(default_factory=list)


def backprop(trace: ForwardTrace, params: NetworkParams, head_grads, embed_grad=None) -> NetworkParams:
    """Parameter gradients given upstream gradients at the heads and embedding."""
    grads = params.zeros_like()
    emb = trace.embedding
    g_emb = np.zeros_like(emb) if embed_grad is None else np.array(embed_grad, dtype=np.float64)
    for i, g in enumerate(head_grads):
        grads.head_weights[i] = emb.T @ g
        grads.head_biases[i] = g.sum(axis=0)
        g_emb = g_emb + g @ params.head_weights[i].T
    g = g_emb
    for i in range(len(params.weights) - 1, -1, -1):
        if i != len(params.weights) - 1:
            g = g * (trace.pre_activations[i] > 0)
        below = trace.inputs if i == 0 else trace.activations[i - 1]
        grads.weights[i] = below.T @ g
        grads.biases[i] = g.sum(axis=0)
        if i:
            g = g @ params.weights[i].T
    return grads


def combined_backward(
    trace: ForwardTrace,
    params: NetworkParams,
    actions,
    labels,
    lam: float,
    loss_params: LossParams = LossParams(),
) -> tuple[NetworkParams, CombinedLossReport]:
    """Gradients of ``pred_loss + lam * supcon_loss`` for every parameter.

    The contrastive gradient enters at the embedding only, so the heads see
    the predictive gradient alone.
    """
    if not lam >= 0:
        raise ValueError(f"lambda must be >= 0, got {lam!r}")
    pred, head_grads, per_head = predictive_loss(trace, actions, params.spec)
    sup, g_sup = supcon_loss_and_grad(trace.embedding, labels, loss_params)
    embed_grad = lam * g_sup if lam != 0 else None
    grads = backprop(trace, params, head_grads, embed_grad)
    report = CombinedLossReport(pred, sup, pred + lam * sup, float(lam), per_head)
    return grads, report


def total_loss(params: NetworkParams, obs, actions, labels, lam: float, loss_params: LossParams = LossParams()) -> float:
    trace = forward(obs, params)
    pred = predictive_loss(trace, actions, params.spec)[0]
    if lam == 0:
        return pred
    return pred + lam * supcon_forward(trace.embedding, labels, loss_params)


@dataclass
class GradCheckReport:
    max_rel_error: float
    mean_rel_error: float
    n_checked: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    """|analytic - numeric| / max(1, |analytic|), elementwise."""
    return np.abs(analytic - numeric) / np.maximum(1.0, np.abs(analytic))


def grad_check(
    params: NetworkParams,
    obs,
    actions,
    labels,
    lam: float = 1.0,
    loss_params: LossParams = LossParams(),
    tolerance: float = 1e-4,
    h: float = 1e-5,
) -> GradCheckReport:
    """Central finite differences against ``combined_backward`` for every parameter."""
    trace = forward(obs, params)
    grads, _ = combined_backward(trace, params, actions, labels, lam, loss_params)
    errors = []
    arrays = params.arrays()
    for k, (arr, g) in enumerate(zip(arrays, grads.arrays())):
        numeric = np.empty_like(arr)
        for idx in np.ndindex(arr.shape):
            saved = arr[idx]
            trial = [a.copy() if j == k else a for j, a in enumerate(arrays)]
            trial[k][idx] = saved + h
            up = total_loss(params.with_arrays(trial), obs, actions, labels, lam, loss_params)
            trial[k][idx] = saved - h
            down = total_loss(params.with_arrays(trial), obs, actions, labels, lam, loss_params)
            numeric[idx] = (up - down) / (2 * h)
        errors.append(relative_error(g, numeric).ravel())
    errors = np.concatenate(errors)
    return GradCheckReport(float(errors.max()), float(errors.mean()), int(errors.size), tolerance)


def save_checkpoint(path, params: NetworkParams, metadata: dict | None = None) -> None:
    """Write an ``.npz`` archive: arrays ``p0..pK`` plus a JSON header.

    The header records format name/version, layer shapes, the action spec
    and any caller metadata.  float64 arrays round-trip bit-exactly.
    """
    arrays = params.arrays()
    header = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "n_extractor_layers": len(params.weights),
        "n_heads": len(params.head_weights),
        "shapes": [list(a.shape) for a in arrays],
        "action_spec": params.spec.to_list(),
        "metadata": metadata or {},
    }
    payload = {f"p{i}": a for i, a in enumerate(arrays)}
    payload["header"] = np.frombuffer(json.dumps(header, sort_keys=True).encode(), dtype=np.uint8)
    with open(path, "wb") as fh:
        np.savez(fh, **payload)


def load_checkpoint(path) -> tuple[NetworkParams, dict]:
    try:
        with np.load(Path(path), allow_pickle=False) as data:
            header = json.loads(bytes(data["header"]).decode())
            if header.get("format") != CHECKPOINT_FORMAT or header.get("version") != CHECKPOINT_VERSION:
                raise ValueError(f"unsupported checkpoint format {header.get('format')!r} v{header.get('version')!r}")
            arrays = [np.array(data[f"p{i}"], dtype=np.float64) for i in range(len(header["shapes"]))]
    except (OSError, KeyError, ValueError, UnicodeDecodeError) as exc:
        raise ValueError(f"cannot read checkpoint {path}: {exc}") from exc
    for a, shape in zip(arrays, header["shapes"]):
        if list(a.shape) != shape:
            raise ValueError(f"checkpoint array shape {a.shape} does not match header {shape}")
    k = header["n_extractor_layers"]
    if len(arrays) != 2 * (k + header["n_heads"]):
        raise ValueError("checkpoint layer counts do not match its arrays")
    spec = ActionSpec.from_list(header["action_spec"])
    params = NetworkParams(arrays[0 : 2 * k : 2], arrays[1 : 2 * k : 2], arrays[2 * k :: 2], arrays[2 * k + 1 :: 2], spec)
    if [w.shape[1] for w in params.head_weights] != head_sizes(spec):
        raise ValueError("checkpoint heads do not match its action spec")
    return params, header["metadata"]


def greedy_actions(head_outputs: Sequence[np.ndarray], spec: ActionSpec) -> np.ndarray:
    """Argmax for discrete heads, clamped regression output for continuous ones."""
    cols = []
    for dim, out in zip(spec.dims, head_outputs):
        if isinstance(dim, Continuous):
            cols.append(np.clip(out[:, 0], dim.lo, dim.hi))
        else:
            cols.append(np.argmax(out, axis=1).astype(np.float64))
    return np.stack(cols, axis=1)
