"""Behavior cloning with an optional supervised-contrastive regularizer.

``lam == 0`` is the baseline (BL); ``lam > 0`` is SCIL.  Both share the
same code path, seeds and batches, so they differ only in the extra
embedding gradient.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .analysis import silhouette
from .labeling import ActionSpec, Continuous, batch_labels
from .network import NetworkParams, combined_backward, forward, greedy_actions, init_params, predictive_loss
from .supcon import LossParams
from .tasks import DemonstrationSet

OPTIMIZERS = ("sgd", "momentum", "adam")


@dataclass
class TrainConfig:
    lam: float = 1.0
    temperature: float = 0.07
    base_temperature: float = 0.07
    bins: int = 5
    batch_size: int = 256
    epochs: int = 40
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    momentum: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    validation_fraction: float = 0.2
    hidden: list[int] = field(default_factory=lambda: [64, 64])
    embed_dim: int = 128

    def __post_init__(self) -> None:
        self.hidden = [int(h) for h in self.hidden]
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise ValueError(f"lam must be a finite number >= 0, got {self.lam!r}")
        LossParams(self.temperature, self.base_temperature)
        if self.bins < 2:
            raise ValueError(f"bins must be >= 2, got {self.bins}")
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2 so the loss has pairs")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must lie in (0, 1)")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")
        if self.embed_dim < 1 or any(h < 1 for h in self.hidden):
            raise ValueError("layer sizes must be positive")

    @property
    def loss_params(self) -> LossParams:
        return LossParams(self.temperature, self.base_temperature)

    @property
    def run_label(self) -> str:
        return "BL" if self.lam == 0 else "SCIL"


class Optimizer:
    """SGD, heavy-ball momentum, or Adam over a list of arrays (in place)."""

    def __init__(self, config: TrainConfig, arrays: Sequence[np.ndarray]) -> None:
        self.kind = config.optimizer
        self.lr = config.learning_rate
        self.config = config
        self.t = 0
        self.m = [np.zeros_like(a) for a in arrays]
        self.v = [np.zeros_like(a) for a in arrays] if self.kind == "adam" else None

    def step(self, arrays: Sequence[np.ndarray], grads: Sequence[np.ndarray]) -> None:
        self.t += 1
        c = self.config
        for i, (p, g) in enumerate(zip(arrays, grads)):
            if self.kind == "sgd":
                p -= self.lr * g
            elif self.kind == "momentum":
                self.m[i] = c.momentum * self.m[i] + g
                p -= self.lr * self.m[i]
            else:
                self.m[i] = c.beta1 * self.m[i] + (1 - c.beta1) * g
                self.v[i] = c.beta2 * self.v[i] + (1 - c.beta2) * g * g
                m_hat = self.m[i] / (1 - c.beta1**self.t)
                v_hat = self.v[i] / (1 - c.beta2**self.t)
                p -= self.lr * m_hat / (np.sqrt(v_hat) + c.adam_eps)


@dataclass
class EpochRecord:
    epoch: int
    train_pred_loss: float
    train_supcon_loss: float
    train_total_loss: float
    val_pred_loss: float
    val_head_errors: list[float]
    val_silhouette: float


@dataclass
class TrainingHistory:
    run_label: str
    head_names: list[str]
    records: list[EpochRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def columns(self) -> list[str]:
        return [
            "epoch",
            "train_pred_loss",
            "train_supcon_loss",
            "train_total_loss",
            "val_pred_loss",
            *self.head_names,
            "val_silhouette",
        ]

    def rows(self) -> list[list[float]]:
        return [
            [r.epoch, r.train_pred_loss, r.train_supcon_loss, r.train_total_loss, r.val_pred_loss, *r.val_head_errors, r.val_silhouette]
            for r in self.records
        ]

    def metric(self, name: str) -> np.ndarray:
        idx = self.columns().index(name)
        return np.array([row[idx] for row in self.rows()], dtype=np.float64)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(f"# run_label={self.run_label}\n")
            writer = csv.writer(fh)
            writer.writerow(self.columns())
            for row in self.rows():
                writer.writerow([row[0], *(repr(float(x)) for x in row[1:])])

    @classmethod
    def from_csv(cls, path) -> "TrainingHistory":
        with open(path, newline="") as fh:
            first = fh.readline().strip()
            label = first.partition("=")[2] if first.startswith("# run_label=") else ""
            if not first.startswith("#"):
                fh.seek(0)
            reader = csv.reader(fh)
            cols = next(reader)
            head_names = cols[5:-1]
            hist = cls(label, head_names)
            for row in reader:
                vals = [float(x) for x in row]
                hist.records.append(EpochRecord(int(vals[0]), vals[1], vals[2], vals[3], vals[4], vals[5:-1], vals[-1]))
        return hist


def head_names(spec: ActionSpec) -> list[str]:
    return [f"val_{'mse' if isinstance(d, Continuous) else 'ce'}_d{i}" for i, d in enumerate(spec.dims)]


@dataclass
class Split:
    train: np.ndarray
    val: np.ndarray


def split_indices(n: int, fraction: float, rng: np.random.Generator) -> Split:
    perm = rng.permutation(n)
    n_val = max(1, int(round(n * fraction)))
    return Split(train=np.sort(perm[n_val:]), val=np.sort(perm[:n_val]))


def _seed_streams(seed: int) -> tuple[np.random.Generator, int, np.random.Generator]:
    split_ss, init_ss, shuffle_ss = np.random.SeedSequence(seed).spawn(3)
    return np.random.default_rng(split_ss), int(init_ss.generate_state(1)[0]), np.random.default_rng(shuffle_ss)


def validation_metrics(params: NetworkParams, obs, actions, labels) -> tuple[float, list[float], float]:
    """Predictive loss, per-head errors and embedding silhouette (no contrastive term)."""
    trace = forward(obs, params)
    pred, _, per_head = predictive_loss(trace, actions, params.spec)
    sil = silhouette(trace.embedding, labels) if np.unique(labels).size > 1 else 0.0
    return pred, per_head, sil


def train(
    config: TrainConfig,
    dataset: DemonstrationSet,
    on_epoch: Optional[Callable[[int, NetworkParams, EpochRecord], None]] = None,
) -> tuple[NetworkParams, TrainingHistory, Split]:
    """Train a policy; returns final params, per-epoch history and the data split.

    Trailing partial batches are dropped each epoch.
    """
    n = len(dataset)
    if n == 0:
        raise ValueError("empty dataset")
    spec = dataset.spec.with_bins(config.bins)
    labels = batch_labels(dataset.actions, spec)
    split_rng, init_seed, shuffle_rng = _seed_streams(config.seed)
    split = split_indices(n, config.validation_fraction, split_rng)
    if config.batch_size > split.train.size:
        raise ValueError(f"batch_size {config.batch_size} exceeds {split.train.size} training samples")

    params = init_params(dataset.obs_dim, config.hidden, config.embed_dim, spec, seed=init_seed)
    arrays = params.arrays()
    opt = Optimizer(config, arrays)
    loss_params = config.loss_params
    obs, acts = dataset.observations, dataset.actions
    history = TrainingHistory(config.run_label, head_names(spec))
    val_obs, val_acts, val_labels = obs[split.val], acts[split.val], labels[split.val]

    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(split.train)
        n_batches = order.size // config.batch_size
        sums = np.zeros(3)
        for b in range(n_batches):
            idx = order[b * config.batch_size : (b + 1) * config.batch_size]
            trace = forward(obs[idx], params)
            grads, report = combined_backward(trace, params, acts[idx], labels[idx], config.lam, loss_params)
            opt.step(arrays, grads.arrays())
            sums += (report.pred_loss, report.supcon_loss, report.total)
        means = sums / n_batches
        val_pred, val_heads, val_sil = validation_metrics(params, val_obs, val_acts, val_labels)
        record = EpochRecord(epoch, *means.tolist(), val_pred, val_heads, val_sil)
        if not all(math.isfinite(x) for x in [*means, val_pred, *val_heads, val_sil]):
            raise FloatingPointError(f"non-finite metrics at epoch {epoch}")
        history.records.append(record)
        if on_epoch is not None:
            on_epoch(epoch, params, record)
    return params, history, split


@dataclass
class EvalStats:
    scores: list[float]
    successes: list[bool]

    @property
    def mean(self) -> float:
        return float(np.mean(self.scores))

    @property
    def std(self) -> float:
        return float(np.std(self.scores))

    @property
    def success_rate(self) -> float:
        return float(np.mean(self.successes))

    def as_dict(self) -> dict:
        return {"episodes": len(self.scores), "mean": self.mean, "std": self.std, "success_rate": self.success_rate}


def rollout(env, act: Callable, n_episodes: int, seed: int) -> EvalStats:
    """Run ``n_episodes`` episodes; ``act(state, obs, rng)`` returns an action.

    Episode ``k`` draws from its own generator seeded by ``(seed, k)``, so
    results do not depend on episode order.
    """
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    scores, successes = [], []
    for k in range(n_episodes):
        rng = np.random.default_rng([seed, k])
        state = env.initial_state(rng)
        total, done = 0.0, False
        while not done:
            obs = env.observe(state, rng)
            state, done, delta = env.step(state, act(state, obs, rng), rng)
            total += delta
        scores.append(total)
        successes.append(bool(env.is_success(total, state)))
    return EvalStats(scores, successes)


def evaluate_policy(params: NetworkParams, env, n_episodes: int, seed: int) -> EvalStats:
    if params.obs_dim != env.obs_dim or len(params.spec) != len(env.spec):
        raise ValueError("network does not match the environment's observation/action layout")

    def act(state, obs, rng):
        trace = forward(obs[None, :], params)
        return greedy_actions(trace.head_outputs, params.spec)[0]

    return rollout(env, act, n_episodes, seed)


def evaluate_random(env, n_episodes: int, seed: int) -> EvalStats:
    return rollout(env, lambda state, obs, rng: env.random_action(rng), n_episodes, seed)


def evaluate_expert(env, n_episodes: int, seed: int) -> EvalStats:
    return rollout(env, lambda state, obs, rng: env.expert(state), n_episodes, seed)


def improvement_over_random(score: float, random_score: float) -> float:
    """Percentage gain over the random agent: 100 * (score - random) / |random|."""
    if random_score == 0:
        return math.inf if score > 0 else (0.0 if score == 0 else -math.inf)
    return 100.0 * (score - random_score) / abs(random_score)


def normalized_improvement(score: float, baseline: float, random_score: float) -> float:
    """Gain over a baseline, with the random agent as the zero point (percent)."""
    span = baseline - random_score
    if span == 0:
        raise ValueError("baseline equals the random score; normalization undefined")
    return 100.0 * (score - baseline) / abs(span)


@dataclass
class ComparisonReport:
    columns: list[str]
    epochs: list[int]
    deltas: dict[str, list[float]]
    auc_a: dict[str, float]
    auc_b: dict[str, float]
    final_silhouette_delta: float

    def to_csv(self, path) -> None:
        """Columns: ``epoch`` then ``delta_<metric>`` (b minus a) per metric."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", *(f"delta_{c}" for c in self.columns)])
            for i, epoch in enumerate(self.epochs):
                writer.writerow([epoch, *(repr(self.deltas[c][i]) for c in self.columns)])

    def summary(self) -> dict:
        out = {"final_silhouette_delta": self.final_silhouette_delta}
        for c in self.columns:
            if c.startswith("val_") and c != "val_silhouette":
                out[f"auc_a_{c}"] = self.auc_a[c]
                out[f"auc_b_{c}"] = self.auc_b[c]
        return out


def _auc(y: np.ndarray) -> float:
    # trapezoid rule over unit-spaced epochs
    if y.size < 2:
        return float(y.sum())
    return float(((y[1:] + y[:-1]) / 2).sum())


def compare_runs(history_a: TrainingHistory, history_b: TrainingHistory) -> ComparisonReport:
    """Per-epoch deltas (b - a), validation-error AUCs and final silhouette delta."""
    if len(history_a) != len(history_b):
        raise ValueError(f"histories cover {len(history_a)} and {len(history_b)} epochs")
    if history_a.columns() != history_b.columns():
        raise ValueError("histories track different metrics")
    if len(history_a) == 0:
        raise ValueError("histories are empty")
    epochs_a = [r.epoch for r in history_a.records]
    if epochs_a != [r.epoch for r in history_b.records]:
        raise ValueError("histories cover different epochs")
    cols = history_a.columns()[1:]
    deltas = {c: (history_b.metric(c) - history_a.metric(c)).tolist() for c in cols}
    return ComparisonReport(
        columns=cols,
        epochs=epochs_a,
        deltas=deltas,
        auc_a={c: _auc(history_a.metric(c)) for c in cols},
        auc_b={c: _auc(history_b.metric(c)) for c in cols},
        final_silhouette_delta=deltas["val_silhouette"][-1],
    )
