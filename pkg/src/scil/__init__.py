"""Supervised contrastive imitation learning (SCIL) in numpy."""

from .labeling import ActionSpec, Continuous, Discrete, batch_labels, decode_label, encode_label
from .supcon import LossParams, supcon_backward, supcon_forward, supcon_oracle
from .trainer import TrainConfig, evaluate_policy, train

__all__ = [
    "ActionSpec",
    "Continuous",
    "Discrete",
    "LossParams",
    "TrainConfig",
    "batch_labels",
    "decode_label",
    "encode_label",
    "evaluate_policy",
    "supcon_backward",
    "supcon_forward",
    "supcon_oracle",
    "train",
]

__version__ = "0.1.0"
