"""Objectworld and Highway generators, expert synthesis and demo sampling."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from .features import FeatureMap, discretize_features
from .mdp import ContractError, DemoSet, TabularMdp, sample_trajectory, validate_mdp
from .soft import MU_MAX, MU_MIN, solve_soft

# (dx, dy) per action; moves off the grid leave the agent in place.
GRID_MOVES = ((0, 0), (1, 0), (-1, 0), (0, 1), (0, -1))
GRID_ACTION_NAMES = ("stay", "east", "west", "south", "north")
HIGHWAY_ACTION_NAMES = ("keep", "left", "right", "faster", "slower")


@dataclass(frozen=True)
class ObjectworldSpec:
    grid_n: int = 16
    n_colors: int = 2
    n_objects: int | None = None
    wind: float = 0.3
    discount: float = 0.9
    feature_mode: str = "discrete"

    def __post_init__(self):
        if self.grid_n < 4:
            raise ContractError("grid_n must be >= 4")
        if self.n_colors < 1:
            raise ContractError("n_colors must be >= 1")
        if not 0.0 <= self.wind <= 1.0:
            raise ContractError("wind must be a probability")
        if self.feature_mode not in ("continuous", "discrete"):
            raise ContractError(f"unknown feature_mode {self.feature_mode!r}")
        if self.n_objects is not None and not 0 <= self.n_objects <= self.grid_n**2:
            raise ContractError(
                f"n_objects={self.n_objects} exceeds the {self.grid_n**2} grid cells"
            )

    @property
    def object_count(self) -> int:
        return self.grid_n**2 // 16 if self.n_objects is None else self.n_objects


@dataclass(frozen=True)
class HighwaySpec:
    length: int = 16
    n_lanes: int = 3
    n_vehicles: int = 8
    speeds: tuple[int, ...] = (1, 2)
    traffic_speed: int = 1
    police_fraction: float = 0.25
    motorcycle_fraction: float = 0.5
    discount: float = 0.9
    feature_mode: str = "discrete"

    def __post_init__(self):
        object.__setattr__(self, "speeds", tuple(int(v) for v in self.speeds))
        if self.n_lanes != 3:
            raise ContractError("the highway has exactly 3 lanes")
        if not self.speeds:
            raise ContractError("speeds must be nonempty")
        if self.length < 4:
            raise ContractError("length must be >= 4")
        if not 0 <= self.n_vehicles <= self.length * self.n_lanes:
            raise ContractError("too many vehicles for the road")
        if self.feature_mode not in ("continuous", "discrete"):
            raise ContractError(f"unknown feature_mode {self.feature_mode!r}")


@dataclass(frozen=True)
class EnvBundle:
    kind: str
    mdp: TabularMdp
    features: FeatureMap
    true_reward: np.ndarray
    spec: dict[str, Any]
    seed: int
    layout: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "seed": self.seed,
            "spec": self.spec,
            "layout": self.layout,
            "mdp": self.mdp.to_dict(),
            "features": self.features.to_dict(),
            "true_reward": self.true_reward.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "EnvBundle":
        return cls(
            kind=d["kind"],
            mdp=TabularMdp.from_dict(d["mdp"]),
            features=FeatureMap.from_dict(d["features"]),
            true_reward=np.asarray(d["true_reward"], dtype=float),
            spec=d["spec"],
            seed=int(d["seed"]),
            layout=d.get("layout", {}),
        )


def _grid_transitions(n: int, wind: float) -> np.ndarray:
    n_states, n_actions = n * n, len(GRID_MOVES)
    dest = np.empty((n_states, n_actions), dtype=int)
    for s in range(n_states):
        y, x = divmod(s, n)
        for a, (dx, dy) in enumerate(GRID_MOVES):
            nx, ny = x + dx, y + dy
            dest[s, a] = ny * n + nx if 0 <= nx < n and 0 <= ny < n else s
    t = np.zeros((n_states, n_actions, n_states))
    for a in range(n_actions):
        for b in range(n_actions):
            p = 1.0 - wind if a == b else wind / (n_actions - 1)
            t[np.arange(n_states), a, dest[:, b]] += p
    return t


def _nearest_distance(cells_xy: np.ndarray, targets_xy: np.ndarray, missing: float) -> np.ndarray:
    if len(targets_xy) == 0:
        return np.full(len(cells_xy), missing)
    diff = cells_xy[:, None, :] - targets_xy[None, :, :]
    return np.sqrt(np.min(np.sum(diff**2, axis=-1), axis=1))


def objectworld_reward(outer_dists: np.ndarray) -> np.ndarray:
    """+1 near both outer colors 0 (<=3) and 1 (<=2); -1 near color 0 only; else 0."""
    near0 = outer_dists[:, 0] <= 3.0
    near1 = outer_dists[:, 1] <= 2.0 if outer_dists.shape[1] > 1 else np.zeros_like(near0)
    return np.where(near0 & near1, 1.0, np.where(near0, -1.0, 0.0))


def gen_objectworld(spec: ObjectworldSpec, seed: int) -> EnvBundle:
    """Random N x N Objectworld with 2C distance features."""
    rng = np.random.default_rng(seed)
    n, c = spec.grid_n, spec.n_colors
    n_states = n * n
    cells = rng.choice(n_states, size=spec.object_count, replace=False)
    outer = rng.integers(0, c, size=len(cells))
    inner = rng.integers(0, c, size=len(cells))

    ys, xs = np.divmod(np.arange(n_states), n)
    grid_xy = np.stack([xs, ys], axis=1).astype(float)
    obj_xy = grid_xy[cells]
    missing = 2.0 * n
    outer_d = np.stack([_nearest_distance(grid_xy, obj_xy[outer == k], missing) for k in range(c)], 1)
    inner_d = np.stack([_nearest_distance(grid_xy, obj_xy[inner == k], missing) for k in range(c)], 1)
    names = tuple(f"outer{k}" for k in range(c)) + tuple(f"inner{k}" for k in range(c))
    continuous = FeatureMap(
        np.concatenate([outer_d, inner_d], axis=1), names, "continuous", ((0.0, float(n)),) * 2 * c
    )
    features = discretize_features(continuous, n) if spec.feature_mode == "discrete" else continuous

    start = np.ones(n_states)
    start[cells] = 0.0
    mdp = TabularMdp(_grid_transitions(n, spec.wind), spec.discount, start / start.sum())
    reward = np.repeat(objectworld_reward(outer_d)[:, None], len(GRID_MOVES), axis=1)
    layout = {
        "object_cells": cells.tolist(),
        "outer_colors": outer.tolist(),
        "inner_colors": inner.tolist(),
        "continuous_features": continuous.values.tolist(),
    }
    return EnvBundle("objectworld", mdp, features, reward, asdict(spec), int(seed), layout)


def highway_state_index(spec: HighwaySpec, cell: int, lane: int, speed: int) -> int:
    return (cell * spec.n_lanes + lane) * len(spec.speeds) + speed


def highway_reward_rule(speed: int, near_police: bool, spec: HighwaySpec) -> float:
    """Faster is better, unless at >= double traffic speed within two cells of police."""
    if speed >= 2 * spec.traffic_speed and near_police:
        return -1.0
    return speed / max(spec.speeds)


def gen_highway(spec: HighwaySpec, seed: int) -> EnvBundle:
    """Deterministic three-lane circular highway, state = (cell, lane, speed)."""
    rng = np.random.default_rng(seed)
    length, lanes, n_speeds = spec.length, spec.n_lanes, len(spec.speeds)
    slots = rng.choice(length * lanes, size=spec.n_vehicles, replace=False)
    v_cell, v_lane = np.divmod(slots, lanes)
    moto = rng.random(spec.n_vehicles) < spec.motorcycle_fraction
    police = rng.random(spec.n_vehicles) < spec.police_fraction

    n_states = length * lanes * n_speeds
    n_actions = len(HIGHWAY_ACTION_NAMES)
    t = np.zeros((n_states, n_actions, n_states))
    groups = {"car": ~moto, "motorcycle": moto, "civilian": ~police, "police": police}
    feats = np.zeros((n_states, 2 * len(groups) + 1))
    reward = np.zeros(n_states)
    for cell in range(length):
        for lane in range(lanes):
            ahead = (v_cell - cell) % length
            same = v_lane == lane
            gap = np.minimum((v_cell - cell) % length, (cell - v_cell) % length)
            near_police = bool(np.any(police & (gap <= 2)))
            row = []
            for mask in groups.values():
                for lane_mask in (same, ~same):
                    m = mask & lane_mask
                    row.append(float(ahead[m].min()) if m.any() else float(length))
            for k in range(n_speeds):
                s = highway_state_index(spec, cell, lane, k)
                feats[s] = row + [float(spec.speeds[k])]
                reward[s] = highway_reward_rule(spec.speeds[k], near_police, spec)
                for a, (dl, dk) in enumerate(((0, 0), (-1, 0), (1, 0), (0, 1), (0, -1))):
                    lane2 = min(max(lane + dl, 0), lanes - 1)
                    k2 = min(max(k + dk, 0), n_speeds - 1)
                    cell2 = (cell + spec.speeds[k2]) % length
                    t[s, a, highway_state_index(spec, cell2, lane2, k2)] = 1.0
    names = tuple(f"{g}_{where}" for g in groups for where in ("same", "other")) + ("speed",)
    bounds = ((0.0, float(length)),) * (2 * len(groups)) + ((0.0, float(max(spec.speeds))),)
    continuous = FeatureMap(feats, names, "continuous", bounds)
    features = (
        discretize_features(continuous, length) if spec.feature_mode == "discrete" else continuous
    )
    # start uniformly over lanes at cell 0 and the slowest speed
    start = np.zeros(n_states)
    for lane in range(lanes):
        start[highway_state_index(spec, 0, lane, 0)] = 1.0 / lanes
    mdp = TabularMdp(t, spec.discount, start)
    layout = {
        "vehicle_cells": v_cell.tolist(),
        "vehicle_lanes": v_lane.tolist(),
        "motorcycle": moto.tolist(),
        "police": police.tolist(),
        "continuous_features": continuous.values.tolist(),
    }
    table = np.repeat(reward[:, None], n_actions, axis=1)
    return EnvBundle("highway", mdp, features, table, asdict(spec), int(seed), layout)


def make_expert(mdp: TabularMdp, true_reward, expert_temp: float = 1.0) -> np.ndarray:
    """Soft-optimal policy with a constant temperature ``expert_temp``."""
    if expert_temp <= 0:
        raise ContractError("expert_temp must be positive")
    mu = np.full(mdp.n_states, float(np.clip(expert_temp, MU_MIN, MU_MAX)))
    return solve_soft(mdp, true_reward, mu).policy


def sample_demos(
    mdp: TabularMdp,
    expert: np.ndarray,
    n_trajs: int,
    horizon: int,
    seed: int,
    meta: dict[str, Any] | None = None,
) -> DemoSet:
    """``n_trajs`` expert rollouts from one seeded stream (prefixes are nested)."""
    if n_trajs < 1:
        raise ContractError("n_trajs must be >= 1")
    rng = np.random.default_rng(seed)
    trajs = tuple(sample_trajectory(mdp, expert, horizon, rng) for _ in range(n_trajs))
    return DemoSet(trajs, int(seed), int(horizon), dict(meta or {}))


def render_objectworld(env: EnvBundle) -> str:
    """ASCII grid: object outer colors as digits, reward signs as + / - / ."""
    n = env.spec["grid_n"]
    r = env.true_reward[:, 0]
    chars = np.where(r > 0, "+", np.where(r < 0, "-", ".")).astype(object)
    for cell, color in zip(env.layout["object_cells"], env.layout["outer_colors"]):
        chars[cell] = str(color)
    return "\n".join("".join(chars[y * n:(y + 1) * n]) for y in range(n))


def render_highway(env: EnvBundle) -> str:
    """One row per lane: C/M civilian car/motorcycle, P/Q police car/motorcycle."""
    length = env.spec["length"]
    rows = [["."] * length for _ in range(env.spec["n_lanes"])]
    lay = env.layout
    for cell, lane, moto, pol in zip(
        lay["vehicle_cells"], lay["vehicle_lanes"], lay["motorcycle"], lay["police"]
    ):
        rows[lane][cell] = ("Q" if moto else "P") if pol else ("M" if moto else "C")
    return "\n".join("".join(row) for row in rows)


def check_env(env: EnvBundle) -> EnvBundle:
    problems = validate_mdp(env.mdp)
    if problems:
        raise ContractError("generated MDP is invalid: " + "; ".join(problems))
    return env
