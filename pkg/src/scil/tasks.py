"""Synthetic imitation tasks with scripted experts.

GridChase: 8x8 grid, five discrete moves, reach the target.
DodgeAim: aim a stick at a target direction and fire, dodge incoming
hazards in time.  Two continuous and two binary action dimensions.

Experts read the true state; learners see observations (noisy for
DodgeAim).  ``step`` takes an explicit generator for the stochastic parts
so states stay plain values.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .labeling import ActionSpec, Continuous, Discrete

GRID_SIZE = 8
GRID_HORIZON = 64
UP, DOWN, LEFT, RIGHT, STAY = range(5)
MOVE_NAMES = ("up", "down", "left", "right", "stay")
_MOVES = {UP: (0, -1), DOWN: (0, 1), LEFT: (-1, 0), RIGHT: (1, 0), STAY: (0, 0)}

DODGE_HORIZON = 200
HAZARD_SPEED = 0.5
DODGE_WINDOW = 2.0
AIM_TOLERANCE = 0.2
OBS_NOISE = 0.05
HAZARD_RANGE = 10.0  # distance reported while no hazard is active
HAZARD_SPAWN_PROB = 0.1
HAZARD_SPAWN_DIST = (3.0, 6.0)


@dataclass(frozen=True)
class GridChaseState:
    agent: tuple[int, int]
    target: tuple[int, int]
    steps_elapsed: int = 0


@dataclass(frozen=True)
class DodgeAimState:
    target_angle: float
    hazard_distance: float = HAZARD_RANGE
    hazard_active: bool = False
    steps_elapsed: int = 0


class GridChase:
    name = "gridchase"
    obs_dim = 4 + 16
    horizon = GRID_HORIZON

    def __init__(self, bins: int = 5) -> None:
        # bins is accepted for a uniform constructor; every dim is discrete
        self.spec = ActionSpec((Discrete(5),))

    def initial_state(self, rng: np.random.Generator) -> GridChaseState:
        cells = rng.choice(GRID_SIZE * GRID_SIZE, size=2, replace=False)
        agent, target = (divmod(int(c), GRID_SIZE)[::-1] for c in cells)
        return GridChaseState(agent=tuple(agent), target=tuple(target))

    def observe(self, state: GridChaseState, rng: Optional[np.random.Generator] = None) -> np.ndarray:
        scale = GRID_SIZE - 1
        coords = [state.agent[0] / scale, state.agent[1] / scale, state.target[0] / scale, state.target[1] / scale]
        occupancy = np.zeros(16)
        for x, y in (state.agent, state.target):
            occupancy[(y // 2) * 4 + x // 2] += 1.0
        return np.concatenate([coords, occupancy])

    def expert(self, state: GridChaseState) -> np.ndarray:
        return np.array([float(gridchase_expert(state))])

    def step(self, state: GridChaseState, action, rng: Optional[np.random.Generator] = None):
        move = _parse_move(action)
        dx, dy = _MOVES[move]
        x = min(max(state.agent[0] + dx, 0), GRID_SIZE - 1)
        y = min(max(state.agent[1] + dy, 0), GRID_SIZE - 1)
        nxt = GridChaseState((x, y), state.target, state.steps_elapsed + 1)
        if nxt.agent == nxt.target:
            return nxt, True, 1.0
        return nxt, nxt.steps_elapsed >= self.horizon, 0.0

    def random_action(self, rng: np.random.Generator) -> np.ndarray:
        return np.array([float(rng.integers(5))])

    def is_success(self, score: float, state) -> bool:
        return score > 0


def _parse_move(action) -> int:
    arr = np.asarray(action, dtype=np.float64).reshape(-1)
    if arr.size != 1 or not np.isfinite(arr[0]) or arr[0] != int(arr[0]) or int(arr[0]) not in _MOVES:
        raise ValueError(f"malformed GridChase action {action!r}")
    return int(arr[0])


def gridchase_expert(state: GridChaseState) -> int:
    """Step along the axis with the larger gap; horizontal wins ties."""
    dx = state.target[0] - state.agent[0]
    dy = state.target[1] - state.agent[1]
    if dx == 0 and dy == 0:
        return STAY
    if abs(dx) >= abs(dy):
        return RIGHT if dx > 0 else LEFT
    return DOWN if dy > 0 else UP


def dodgeaim_expert(state: DodgeAimState) -> tuple[float, float, int, int]:
    dodge = int(state.hazard_active and state.hazard_distance < DODGE_WINDOW)
    return (math.cos(state.target_angle), math.sin(state.target_angle), dodge, 1 - dodge)


def angular_error(a: float, b: float) -> float:
    diff = (a - b) % (2 * math.pi)
    return min(diff, 2 * math.pi - diff)


class DodgeAim:
    name = "dodgeaim"
    obs_dim = 4
    horizon = DODGE_HORIZON

    def __init__(self, bins: int = 5) -> None:
        self.spec = ActionSpec((Continuous(-1.0, 1.0, bins), Continuous(-1.0, 1.0, bins), Discrete(2), Discrete(2)))

    def initial_state(self, rng: np.random.Generator) -> DodgeAimState:
        return DodgeAimState(target_angle=float(rng.uniform(0.0, 2 * math.pi)))

    def observe(self, state: DodgeAimState, rng: np.random.Generator) -> np.ndarray:
        noise = rng.normal(0.0, OBS_NOISE, size=2)
        return np.array(
            [
                math.cos(state.target_angle) + noise[0],
                math.sin(state.target_angle) + noise[1],
                state.hazard_distance / HAZARD_RANGE,
                float(state.hazard_active),
            ]
        )

    def expert(self, state: DodgeAimState) -> np.ndarray:
        return np.array(dodgeaim_expert(state), dtype=np.float64)

    def step(self, state: DodgeAimState, action, rng: np.random.Generator):
        """Dodge (clears a hazard inside the window) or fire, then hazards move.

        Dodging takes priority over firing in the same step.  A hazard that
        reaches distance 0 ends the episode with no score for that step.
        """
        arr = np.asarray(action, dtype=np.float64).reshape(-1)
        if arr.size != 4 or not np.all(np.isfinite(arr)) or arr[2] not in (0.0, 1.0) or arr[3] not in (0.0, 1.0):
            raise ValueError(f"malformed DodgeAim action {action!r}")
        sx, sy, dodge, fire = arr
        angle = state.target_angle
        distance, active = state.hazard_distance, state.hazard_active
        score = 0.0
        if dodge:
            if active and distance < DODGE_WINDOW:
                distance, active = HAZARD_RANGE, False
        elif fire and (sx != 0.0 or sy != 0.0):
            if angular_error(math.atan2(sy, sx), angle) < AIM_TOLERANCE:
                score = 1.0
                angle = float(rng.uniform(0.0, 2 * math.pi))
        if active:
            distance -= HAZARD_SPEED
            if distance <= 0.0:
                return DodgeAimState(angle, 0.0, True, state.steps_elapsed + 1), True, 0.0
        elif rng.random() < HAZARD_SPAWN_PROB:
            distance, active = float(rng.uniform(*HAZARD_SPAWN_DIST)), True
        nxt = DodgeAimState(angle, distance, active, state.steps_elapsed + 1)
        return nxt, nxt.steps_elapsed >= self.horizon, score

    def random_action(self, rng: np.random.Generator) -> np.ndarray:
        sx, sy = rng.uniform(-1.0, 1.0, size=2)
        dodge, fire = rng.integers(0, 2, size=2)
        return np.array([sx, sy, float(dodge), float(fire)])

    def is_success(self, score: float, state: DodgeAimState) -> bool:
        # survived to the horizon
        return state.steps_elapsed >= self.horizon and not (state.hazard_active and state.hazard_distance <= 0.0)


ENVS = {"gridchase": GridChase, "dodgeaim": DodgeAim}


def make_env(name: str, bins: int = 5):
    try:
        return ENVS[name](bins=bins)
    except KeyError:
        raise ValueError(f"unknown env {name!r}; choose from {sorted(ENVS)}") from None


@dataclass
class DemonstrationSet:
    env: str
    observations: np.ndarray
    actions: np.ndarray
    spec: ActionSpec
    seed: int
    episode_ends: list[int]
    states: list[Any] = field(default_factory=list, repr=False)  # in-memory only

    def __len__(self) -> int:
        return self.observations.shape[0]

    @property
    def obs_dim(self) -> int:
        return self.observations.shape[1]


def generate_dataset(env, n_episodes: int, seed: int) -> DemonstrationSet:
    """Roll the scripted expert from seeded random starts."""
    if n_episodes < 1:
        raise ValueError(f"n_episodes must be >= 1, got {n_episodes}")
    rng = np.random.default_rng(seed)
    obs, acts, states, ends = [], [], [], []
    for _ in range(n_episodes):
        state = env.initial_state(rng)
        done = False
        while not done:
            action = env.expert(state)
            obs.append(env.observe(state, rng))
            acts.append(action)
            states.append(state)
            state, done, _ = env.step(state, action, rng)
        ends.append(len(obs))
    return DemonstrationSet(
        env=env.name,
        observations=np.array(obs, dtype=np.float64),
        actions=np.array(acts, dtype=np.float64),
        spec=env.spec,
        seed=int(seed),
        episode_ends=ends,
        states=states,
    )


# Dataset container, little-endian throughout:
#   bytes 0..7    magic b"SCILDEMO"
#   bytes 8..11   uint32 format version (1)
#   bytes 12..19  uint64 header length H
#   next H bytes  UTF-8 JSON header: env, action_spec, obs_dim, action_dim,
#                 n, seed, episode_ends, dtype ("<f8")
#   payload       n*obs_dim float64 observations (row-major), then
#                 n*action_dim float64 actions (row-major)
DATASET_MAGIC = b"SCILDEMO"
DATASET_VERSION = 1
_PREFIX = struct.Struct("<8sIQ")


def save_dataset(ds: DemonstrationSet, path) -> None:
    header = {
        "env": ds.env,
        "action_spec": ds.spec.to_list(),
        "obs_dim": int(ds.observations.shape[1]),
        "action_dim": int(ds.actions.shape[1]),
        "n": len(ds),
        "seed": ds.seed,
        "episode_ends": [int(e) for e in ds.episode_ends],
        "dtype": "<f8",
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_PREFIX.pack(DATASET_MAGIC, DATASET_VERSION, len(blob)))
        fh.write(blob)
        fh.write(np.ascontiguousarray(ds.observations, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(ds.actions, dtype="<f8").tobytes())


def load_dataset(path) -> DemonstrationSet:
    raw = Path(path).read_bytes()
    if len(raw) < _PREFIX.size:
        raise ValueError(f"{path}: file too short for a dataset header")
    magic, version, hlen = _PREFIX.unpack_from(raw)
    if magic != DATASET_MAGIC or version != DATASET_VERSION:
        raise ValueError(f"{path}: not a version-{DATASET_VERSION} SCIL dataset")
    start = _PREFIX.size
    try:
        header = json.loads(raw[start : start + hlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValueError(f"{path}: corrupt dataset header") from exc
    n, o, d = header["n"], header["obs_dim"], header["action_dim"]
    body = raw[start + hlen :]
    if len(body) != 8 * n * (o + d):
        raise ValueError(f"{path}: payload has {len(body)} bytes, expected {8 * n * (o + d)}")
    flat = np.frombuffer(body, dtype="<f8").astype(np.float64)
    return DemonstrationSet(
        env=header["env"],
        observations=flat[: n * o].reshape(n, o).copy(),
        actions=flat[n * o :].reshape(n, d).copy(),
        spec=ActionSpec.from_list(header["action_spec"]),
        seed=header["seed"],
        episode_ends=list(header["episode_ends"]),
    )


def export_dataset_text(ds: DemonstrationSet, path) -> None:
    """Human-readable dump: ``#``-prefixed header lines, then CSV rows."""
    obs_cols = [f"obs{i}" for i in range(ds.obs_dim)]
    act_cols = [f"act{i}" for i in range(ds.actions.shape[1])]
    with open(path, "w") as fh:
        fh.write(f"# env={ds.env} seed={ds.seed} n={len(ds)}\n")
        fh.write(f"# action_spec={json.dumps(ds.spec.to_list())}\n")
        fh.write(f"# episode_ends={json.dumps(ds.episode_ends)}\n")
        fh.write(",".join(obs_cols + act_cols) + "\n")
        for o, a in zip(ds.observations, ds.actions):
            fh.write(",".join(repr(float(x)) for x in (*o, *a)) + "\n")
