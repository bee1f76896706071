"""Paired baseline-vs-SCIL runs on a shared dataset.

Both arms use the same dataset, split, initialization, batch order and
evaluation episodes; only the contrastive weight differs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .tasks import DemonstrationSet, make_env
from .trainer import (
    EvalStats,
    TrainConfig,
    TrainingHistory,
    compare_runs,
    evaluate_policy,
    evaluate_random,
    improvement_over_random,
)

log = logging.getLogger(__name__)


@dataclass
class ArmResult:
    seed: int
    lam: float
    history: TrainingHistory
    final_silhouette: float
    stick_mse_last: float  # mean over continuous heads of the last-k-epoch mean
    rollout: EvalStats


@dataclass
class PairedResult:
    bins: int
    baseline: list[ArmResult]
    scil: list[ArmResult]
    random_rollout: EvalStats

    @property
    def baseline_score(self) -> float:
        return float(np.mean([s for r in self.baseline for s in r.rollout.scores]))

    @property
    def scil_score(self) -> float:
        return float(np.mean([s for r in self.scil for s in r.rollout.scores]))

    def normalized(self) -> dict[str, float]:
        rnd = self.random_rollout.mean
        return {
            "random_mean": rnd,
            "baseline_vs_random_pct": improvement_over_random(self.baseline_score, rnd),
            "scil_vs_random_pct": improvement_over_random(self.scil_score, rnd),
        }

    def rows(self) -> list[dict]:
        out = []
        for bl, sc in zip(self.baseline, self.scil):
            cmp = compare_runs(bl.history, sc.history)
            out.append(
                {
                    "bins": self.bins,
                    "seed": bl.seed,
                    "bl_silhouette": bl.final_silhouette,
                    "scil_silhouette": sc.final_silhouette,
                    "bl_stick_mse": bl.stick_mse_last,
                    "scil_stick_mse": sc.stick_mse_last,
                    "bl_score": bl.rollout.mean,
                    "scil_score": sc.rollout.mean,
                    "silhouette_delta": cmp.final_silhouette_delta,
                }
            )
        return out


def continuous_heads(history: TrainingHistory) -> list[str]:
    return [h for h in history.head_names if h.startswith("val_mse_")]


def run_arm(config: TrainConfig, dataset: DemonstrationSet, eval_episodes: int, eval_seed: int, last_k: int = 10) -> ArmResult:
    from .trainer import train

    params, history, _ = train(config, dataset)
    heads = continuous_heads(history)
    mse = float(np.mean([history.metric(h)[-last_k:].mean() for h in heads])) if heads else float("nan")
    env = make_env(dataset.env, config.bins)
    rollout = evaluate_policy(params, env, eval_episodes, eval_seed)
    log.info("%s seed=%d bins=%d silhouette=%.4f mse=%.6f score=%.2f", config.run_label, config.seed, config.bins,
             history.records[-1].val_silhouette, mse, rollout.mean)
    return ArmResult(config.seed, config.lam, history, history.records[-1].val_silhouette, mse, rollout)


def paired_experiment(
    dataset: DemonstrationSet,
    base: TrainConfig,
    seeds: Sequence[int] = (0, 1, 2),
    scil_lambda: float = 1.0,
    eval_episodes: int = 100,
    eval_seed: int = 1000,
    last_k: int = 10,
) -> PairedResult:
    baseline, scil = [], []
    for seed in seeds:
        baseline.append(run_arm(replace(base, lam=0.0, seed=seed), dataset, eval_episodes, eval_seed, last_k))
        scil.append(run_arm(replace(base, lam=scil_lambda, seed=seed), dataset, eval_episodes, eval_seed, last_k))
    random_rollout = evaluate_random(make_env(dataset.env, base.bins), eval_episodes, eval_seed)
    return PairedResult(base.bins, baseline, scil, random_rollout)
