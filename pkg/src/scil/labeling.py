"""Action discretization and mixed-radix class labels.

Continuous action dimensions are squashed to [0, 1], rounded into ``bins``
buckets, and the resulting digit vector is folded into one integer with a
mixed-radix positional code (each dimension is one digit, its base being
the bin count or the discrete cardinality).  Labels are used only to pick
positives for the contrastive term; stored actions are never modified.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

UINT64_MAX = 2**64 - 1


@dataclass(frozen=True)
class Discrete:
    cardinality: int

    def __post_init__(self) -> None:
        if int(self.cardinality) != self.cardinality or self.cardinality < 1:
            raise ValueError(f"cardinality must be a positive integer, got {self.cardinality!r}")

    @property
    def base(self) -> int:
        return int(self.cardinality)

    def to_dict(self) -> dict:
        return {"kind": "discrete", "cardinality": int(self.cardinality)}


@dataclass(frozen=True)
class Continuous:
    lo: float
    hi: float
    bins: int = 5

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)) or self.lo >= self.hi:
            raise ValueError(f"continuous range needs finite lo < hi, got [{self.lo}, {self.hi}]")
        if int(self.bins) != self.bins or self.bins < 2:
            raise ValueError(f"bins must be an integer >= 2, got {self.bins!r}")

    @property
    def base(self) -> int:
        return int(self.bins)

    def to_dict(self) -> dict:
        return {"kind": "continuous", "lo": float(self.lo), "hi": float(self.hi), "bins": int(self.bins)}


DimensionSpec = Union[Discrete, Continuous]


@dataclass(frozen=True)
class ActionSpec:
    """Ordered per-dimension description of an action space."""

    dims: tuple[DimensionSpec, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "dims", tuple(self.dims))
        if not self.dims:
            raise ValueError("ActionSpec needs at least one dimension")
        for d in self.dims:
            if not isinstance(d, (Discrete, Continuous)):
                raise TypeError(f"unsupported dimension spec {d!r}")
        if self.label_space_size > UINT64_MAX:
            raise ValueError(
                f"label space {self.label_space_size} does not fit in an unsigned 64-bit integer"
            )

    @property
    def bases(self) -> tuple[int, ...]:
        return tuple(d.base for d in self.dims)

    @property
    def label_space_size(self) -> int:
        return math.prod(self.bases)

    def __len__(self) -> int:
        return len(self.dims)

    def with_bins(self, bins: int) -> "ActionSpec":
        """Copy of this spec with every continuous dimension set to ``bins``."""
        return ActionSpec(
            tuple(Continuous(d.lo, d.hi, bins) if isinstance(d, Continuous) else d for d in self.dims)
        )

    def to_list(self) -> list[dict]:
        return [d.to_dict() for d in self.dims]

    @classmethod
    def from_list(cls, entries: Sequence[dict]) -> "ActionSpec":
        dims: list[DimensionSpec] = []
        for i, entry in enumerate(entries):
            entry = dict(entry)
            kind = entry.pop("kind", None)
            if kind == "discrete":
                allowed = {"cardinality"}
                if set(entry) - allowed or "cardinality" not in entry:
                    raise ValueError(f"action dim {i}: discrete entries take exactly 'cardinality'")
                dims.append(Discrete(entry["cardinality"]))
            elif kind == "continuous":
                allowed = {"lo", "hi", "bins"}
                if set(entry) - allowed or not {"lo", "hi"} <= set(entry):
                    raise ValueError(f"action dim {i}: continuous entries take 'lo', 'hi' and optional 'bins'")
                dims.append(Continuous(float(entry["lo"]), float(entry["hi"]), entry.get("bins", 5)))
            else:
                raise ValueError(f"action dim {i}: unknown kind {kind!r}")
        return cls(tuple(dims))


def _round_half_away(x: np.ndarray | float) -> np.ndarray:
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def normalize_continuous(value: float, lo: float, hi: float) -> float:
    """Map ``value`` from [lo, hi] onto [0, 1], clamping outside values."""
    if not math.isfinite(value):
        raise ValueError(f"non-finite action value {value!r}")
    if not lo < hi:
        raise ValueError(f"need lo < hi, got lo={lo}, hi={hi}")
    return min(max((value - lo) / (hi - lo), 0.0), 1.0)


def discretize_dimension(u: float, bins: int) -> int:
    if not 0.0 <= u <= 1.0:
        raise ValueError(f"u={u!r} is outside [0, 1]; normalize first")
    if bins < 2:
        raise ValueError(f"bins must be >= 2, got {bins}")
    return int(_round_half_away(u * (bins - 1)))


def _check_bases(bases: Sequence[int]) -> tuple[int, ...]:
    bases = tuple(int(b) for b in bases)
    if not bases or any(b < 1 for b in bases):
        raise ValueError(f"bases must be positive integers, got {bases}")
    if math.prod(bases) > UINT64_MAX:
        raise OverflowError(f"label space of bases {bases} overflows 64 bits")
    return bases


def encode_label(v: Sequence[int], bases: Sequence[int]) -> int:
    """Mixed-radix encoding; the first dimension is the least significant digit.

    >>> encode_label((1, 2, 1), (2, 3, 2))
    11
    """
    bases = _check_bases(bases)
    if len(v) != len(bases):
        raise ValueError(f"digit vector has {len(v)} entries but {len(bases)} bases")
    label = 0
    weight = 1
    for d, (digit, base) in enumerate(zip(v, bases)):
        digit = int(digit)
        if not 0 <= digit < base:
            raise ValueError(f"digit {digit} at position {d} is outside [0, {base - 1}]")
        label += digit * weight
        weight *= base
    return label


def decode_label(label: int, bases: Sequence[int]) -> tuple[int, ...]:
    bases = _check_bases(bases)
    label = int(label)
    if not 0 <= label < math.prod(bases):
        raise ValueError(f"label {label} is outside [0, {math.prod(bases) - 1}]")
    digits = []
    for base in bases:
        label, digit = divmod(label, base)
        digits.append(digit)
    return tuple(digits)


def discretize_actions(actions: np.ndarray, spec: ActionSpec) -> np.ndarray:
    """Per-row digit vectors (N x D int64) for a raw action batch."""
    actions = np.asarray(actions, dtype=np.float64)
    if actions.ndim == 1:
        actions = actions[:, None]
    if actions.ndim != 2 or actions.shape[1] != len(spec):
        raise ValueError(f"action batch has shape {actions.shape}, spec expects {len(spec)} dims")
    if not np.all(np.isfinite(actions)):
        raise ValueError("action batch contains non-finite values")
    digits = np.empty(actions.shape, dtype=np.int64)
    for d, dim in enumerate(spec.dims):
        col = actions[:, d]
        if isinstance(dim, Continuous):
            u = np.clip((col - dim.lo) / (dim.hi - dim.lo), 0.0, 1.0)
            digits[:, d] = _round_half_away(u * (dim.bins - 1)).astype(np.int64)
        else:
            as_int = np.rint(col)
            if np.any(as_int != col) or np.any(as_int < 0) or np.any(as_int >= dim.cardinality):
                raise ValueError(f"dim {d} holds values outside the integer range [0, {dim.cardinality - 1}]")
            digits[:, d] = as_int.astype(np.int64)
    return digits


def batch_labels(actions: np.ndarray, spec: ActionSpec) -> np.ndarray:
    """Integer class label per action row (uint64).

    The input array is read only; discretization happens on a copy.
    """
    digits = discretize_actions(actions, spec)
    weights = np.ones(len(spec), dtype=np.uint64)
    for d in range(1, len(spec)):
        weights[d] = weights[d - 1] * np.uint64(spec.bases[d - 1])
    return (digits.astype(np.uint64) * weights[None, :]).sum(axis=1, dtype=np.uint64)
