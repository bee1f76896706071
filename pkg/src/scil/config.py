"""Experiment config file (JSON).

Every key is optional; unknown keys are rejected.  Example::

    {
      "env": "dodgeaim",
      "output_dir": "runs/dodgeaim",
      "episodes": 20,
      "data_seed": 0,
      "eval_episodes": 100,
      "action_spec": [
        {"kind": "continuous", "lo": -1, "hi": 1, "bins": 5},
        {"kind": "continuous", "lo": -1, "hi": 1, "bins": 5},
        {"kind": "discrete", "cardinality": 2},
        {"kind": "discrete", "cardinality": 2}
      ],
      "train": {"lam": 1.0, "temperature": 0.07, "base_temperature": 0.07,
                "bins": 5, "batch_size": 256, "epochs": 40}
    }

``action_spec`` defaults to the environment's own layout; if given it must
have the same dimension kinds, cardinalities and ranges.  Its continuous
bin counts are informational, ``train.bins`` decides the labelling.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

from .labeling import ActionSpec, Continuous
from .tasks import ENVS, make_env
from .trainer import TrainConfig

TOP_LEVEL_KEYS = {"env", "output_dir", "episodes", "data_seed", "eval_episodes", "action_spec", "train"}
TRAIN_KEYS = {f.name for f in fields(TrainConfig)}


@dataclass
class ExperimentConfig:
    env: str = "dodgeaim"
    output_dir: str = "runs"
    episodes: int = 20
    data_seed: int = 0
    eval_episodes: int = 100
    action_spec: Optional[ActionSpec] = None
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self) -> None:
        if self.env not in ENVS:
            raise ValueError(f"unknown env {self.env!r}; choose from {sorted(ENVS)}")
        if self.episodes < 1:
            raise ValueError("episodes must be >= 1")
        if self.eval_episodes < 1:
            raise ValueError("eval_episodes must be >= 1")
        native = make_env(self.env, self.train.bins).spec
        if self.action_spec is None:
            self.action_spec = native
        elif _layout(self.action_spec) != _layout(native):
            raise ValueError(f"action_spec does not match the {self.env} action layout")

    def to_dict(self) -> dict:
        return {
            "env": self.env,
            "output_dir": self.output_dir,
            "episodes": self.episodes,
            "data_seed": self.data_seed,
            "eval_episodes": self.eval_episodes,
            "action_spec": self.action_spec.to_list(),
            "train": asdict(self.train),
        }


def _layout(spec: ActionSpec) -> list:
    return [(type(d).__name__, d.lo, d.hi) if isinstance(d, Continuous) else (type(d).__name__, d.cardinality) for d in spec.dims]


def config_from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ValueError("config must be a JSON object")
    unknown = set(raw) - TOP_LEVEL_KEYS
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    train_raw = raw.get("train", {})
    if not isinstance(train_raw, dict):
        raise ValueError("'train' must be an object")
    unknown = set(train_raw) - TRAIN_KEYS
    if unknown:
        raise ValueError(f"unknown train keys: {sorted(unknown)}")
    kwargs = {k: v for k, v in raw.items() if k not in ("train", "action_spec")}
    if "action_spec" in raw:
        kwargs["action_spec"] = ActionSpec.from_list(raw["action_spec"])
    return ExperimentConfig(train=TrainConfig(**train_raw), **kwargs)


def load_config(path) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON ({exc})") from exc
    return config_from_dict(raw)
