"""Tabular MDP, policy and trajectory primitives.

Rewards and policies are plain ``(n_states, n_actions)`` numpy arrays; the
MDP and demonstration containers are frozen dataclasses that round-trip
through JSON.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Any

import numpy as np
import scipy.sparse as sp

ROW_TOL = 1e-12
POLICY_TOL = 1e-10
# Above this size policy evaluation switches from a dense solve to iteration.
DIRECT_SOLVE_MAX_STATES = 4096


class ContractError(ValueError):
    """An input violates a documented precondition."""


@dataclass(frozen=True)
class TabularMdp:
    """Finite discounted MDP.

    Attributes:
        transition: ``(S, A, S)`` array, ``transition[s, a, s'] = q(s'|s, a)``.
        discount: discount factor in ``[0, 1)``.
        start_dist: ``(S,)`` start-state distribution.
    """

    transition: np.ndarray
    discount: float
    start_dist: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.transition, dtype=float)
        p0 = np.asarray(self.start_dist, dtype=float)
        t.setflags(write=False)
        p0.setflags(write=False)
        object.__setattr__(self, "transition", t)
        object.__setattr__(self, "start_dist", p0)
        object.__setattr__(self, "discount", float(self.discount))

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]

    @property
    def flat_transition(self) -> np.ndarray:
        """``(S*A, S)`` view used for batched expectations."""
        return self.transition.reshape(-1, self.n_states)

    @cached_property
    def _operator(self):
        flat = self.flat_transition
        if flat.size > 4096 and np.count_nonzero(flat) < 0.1 * flat.size:
            return sp.csr_matrix(flat)
        return flat

    def expect_next(self, values: np.ndarray) -> np.ndarray:
        """E_{s'|s,a}[values(s')] for every (s, a); trailing axes are kept."""
        values = np.asarray(values, dtype=float)
        out = self._operator @ values.reshape(self.n_states, -1)
        return out.reshape((self.n_states, self.n_actions) + values.shape[1:])

    def to_dict(self) -> dict[str, Any]:
        """JSON form; transitions are stored as sparse ``(s, a, s')`` triples."""
        s, a, s2 = np.nonzero(self.transition)
        return {
            "n_states": self.n_states,
            "n_actions": self.n_actions,
            "discount": self.discount,
            "start_dist": self.start_dist.tolist(),
            "transition": {
                "index": np.stack([s, a, s2], axis=1).tolist(),
                "prob": self.transition[s, a, s2].tolist(),
            },
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "TabularMdp":
        shape = (d["n_states"], d["n_actions"], d["n_states"])
        raw = d["transition"]
        if isinstance(raw, dict):
            t = np.zeros(shape)
            idx = np.asarray(raw["index"], dtype=int).reshape(-1, 3)
            t[idx[:, 0], idx[:, 1], idx[:, 2]] = np.asarray(raw["prob"], dtype=float)
        else:
            t = np.asarray(raw, dtype=float).reshape(shape)
        return cls(transition=t, discount=d["discount"], start_dist=np.asarray(d["start_dist"]))


def validate_mdp(mdp: TabularMdp) -> list[str]:
    """Return a list of human-readable invariant violations (empty if valid)."""
    problems = []
    t = mdp.transition
    if t.ndim != 3 or t.shape[0] != t.shape[2] or t.shape[0] < 1 or t.shape[1] < 1:
        return [f"transition must have shape (S, A, S) with S, A >= 1, got {t.shape}"]
    if not np.all(np.isfinite(t)):
        problems.append("transition contains non-finite entries")
    if np.any(t < 0):
        s, a, s2 = np.argwhere(t < 0)[0]
        problems.append(f"negative probability q({s2}|{s},{a}) = {t[s, a, s2]}")
    sums = t.sum(axis=2)
    bad = np.argwhere(np.abs(sums - 1.0) > ROW_TOL)
    for s, a in bad[:10]:
        problems.append(f"row q(.|{s},{a}) sum {sums[s, a]:.12g} != 1")
    if len(bad) > 10:
        problems.append(f"... {len(bad) - 10} more bad transition rows")
    p0 = mdp.start_dist
    if p0.shape != (t.shape[0],):
        problems.append(f"start_dist shape {p0.shape} != ({t.shape[0]},)")
    else:
        if np.any(p0 < 0):
            problems.append("start_dist has negative entries")
        if abs(p0.sum() - 1.0) > ROW_TOL:
            problems.append(f"start_dist sum {p0.sum():.12g} != 1")
    if not 0.0 <= mdp.discount < 1.0:
        problems.append(f"discount {mdp.discount} not in [0, 1)")
    return problems


def check_policy(policy: np.ndarray, mdp: TabularMdp | None = None) -> np.ndarray:
    """Validate a row-stochastic ``(S, A)`` policy table and return it as float."""
    policy = np.asarray(policy, dtype=float)
    if policy.ndim != 2:
        raise ContractError(f"policy must be 2-D, got shape {policy.shape}")
    if mdp is not None and policy.shape != (mdp.n_states, mdp.n_actions):
        raise ContractError(
            f"policy shape {policy.shape} != ({mdp.n_states}, {mdp.n_actions})"
        )
    if np.any(policy < 0) or np.any(policy > 1):
        raise ContractError("policy entries must lie in [0, 1]")
    err = np.abs(policy.sum(axis=1) - 1.0)
    if np.any(err > POLICY_TOL):
        s = int(np.argmax(err))
        raise ContractError(f"policy row {s} sums to {policy[s].sum():.12g}, not 1")
    return policy


def as_reward_table(reward: np.ndarray, mdp: TabularMdp) -> np.ndarray:
    """Broadcast a state-only ``(S,)`` reward to ``(S, A)``; pass ``(S, A)`` through."""
    reward = np.asarray(reward, dtype=float)
    if reward.shape == (mdp.n_states,):
        reward = np.repeat(reward[:, None], mdp.n_actions, axis=1)
    if reward.shape != (mdp.n_states, mdp.n_actions):
        raise ContractError(f"reward shape {reward.shape} incompatible with MDP")
    if not np.all(np.isfinite(reward)):
        raise ContractError("reward contains non-finite entries")
    return reward


def state_transition(mdp: TabularMdp, policy: np.ndarray) -> np.ndarray:
    """Policy-induced ``(S, S)`` state transition matrix."""
    return np.einsum("sa,sat->st", policy, mdp.transition)


def evaluate_policy(
    mdp: TabularMdp, policy: np.ndarray, reward: np.ndarray, tol: float = 1e-12
) -> np.ndarray:
    """Exact state values V^pi of ``policy`` under ``reward``."""
    policy = check_policy(policy, mdp)
    reward = as_reward_table(reward, mdp)
    r_pi = np.sum(policy * reward, axis=1)
    p_pi = state_transition(mdp, policy)
    n = mdp.n_states
    if n <= DIRECT_SOLVE_MAX_STATES:
        return np.linalg.solve(np.eye(n) - mdp.discount * p_pi, r_pi)
    v = np.zeros(n)
    while True:
        v_new = r_pi + mdp.discount * p_pi @ v
        if np.max(np.abs(v_new - v)) <= tol:
            return v_new
        v = v_new


def policy_return(mdp: TabularMdp, policy: np.ndarray, reward: np.ndarray) -> float:
    """Expected discounted return from the start distribution."""
    return float(mdp.start_dist @ evaluate_policy(mdp, policy, reward))


def discounted_state_occupancy(mdp: TabularMdp, policy: np.ndarray) -> np.ndarray:
    """d(s) = sum_t gamma^t P(s_t = s); sums to 1 / (1 - gamma)."""
    policy = check_policy(policy, mdp)
    p_pi = state_transition(mdp, policy)
    a = np.eye(mdp.n_states) - mdp.discount * p_pi.T
    return np.linalg.solve(a, mdp.start_dist)


@dataclass(frozen=True)
class Trajectory:
    """A finite (state, action) path.

    ``final_state`` is the state reached after the last action when known,
    so every step has a successor for (s, a, s') consumers.
    """

    states: tuple[int, ...]
    actions: tuple[int, ...]
    final_state: int | None = None

    def __post_init__(self):
        if len(self.states) != len(self.actions):
            raise ContractError("states and actions must have equal length")

    @property
    def length(self) -> int:
        return len(self.states)

    @property
    def steps(self) -> list[tuple[int, int]]:
        return list(zip(self.states, self.actions))

    def next_states(self) -> tuple[int, ...]:
        if self.final_state is None:
            raise ContractError("trajectory has no final_state; successors unknown")
        return self.states[1:] + (self.final_state,)

    def to_dict(self) -> dict[str, Any]:
        d = {"states": list(self.states), "actions": list(self.actions)}
        if self.final_state is not None:
            d["final_state"] = self.final_state
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Trajectory":
        return cls(
            states=tuple(int(s) for s in d["states"]),
            actions=tuple(int(a) for a in d["actions"]),
            final_state=d.get("final_state"),
        )


@dataclass(frozen=True)
class DemoSet:
    """Expert demonstrations plus the metadata needed to regenerate them."""

    trajectories: tuple[Trajectory, ...]
    seed: int
    horizon: int
    meta: dict[str, Any] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.trajectories)

    def pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """All (state, action) pairs as two flat int arrays."""
        if not self.trajectories:
            return np.zeros(0, dtype=int), np.zeros(0, dtype=int)
        s = np.concatenate([np.asarray(t.states, dtype=int) for t in self.trajectories])
        a = np.concatenate([np.asarray(t.actions, dtype=int) for t in self.trajectories])
        return s, a

    def transitions(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """All (s, a, s') triples; requires ``final_state`` on every trajectory."""
        s, a = self.pairs()
        s2 = np.concatenate([np.asarray(t.next_states(), dtype=int) for t in self.trajectories])
        return s, a, s2

    @property
    def n_pairs(self) -> int:
        return sum(t.length for t in self.trajectories)

    def subset(self, n: int) -> "DemoSet":
        return DemoSet(self.trajectories[:n], self.seed, self.horizon, dict(self.meta))

    def to_dict(self) -> dict[str, Any]:
        return {
            "seed": self.seed,
            "horizon": self.horizon,
            "meta": self.meta,
            "trajectories": [t.to_dict() for t in self.trajectories],
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "DemoSet":
        return cls(
            trajectories=tuple(Trajectory.from_dict(t) for t in d["trajectories"]),
            seed=int(d["seed"]),
            horizon=int(d["horizon"]),
            meta=dict(d.get("meta", {})),
        )


def check_pairs(demos: DemoSet, mdp: TabularMdp) -> tuple[np.ndarray, np.ndarray]:
    if len(demos) == 0 or demos.n_pairs == 0:
        raise ContractError("demonstration set is empty")
    s, a = demos.pairs()
    if s.min() < 0 or s.max() >= mdp.n_states:
        raise ContractError("demonstration references a state out of range")
    if a.min() < 0 or a.max() >= mdp.n_actions:
        raise ContractError("demonstration references an action out of range")
    return s, a


def sample_trajectory(
    mdp: TabularMdp, policy: np.ndarray, horizon: int, rng_seed: int | np.random.Generator
) -> Trajectory:
    """Roll out ``policy`` for ``horizon`` steps from ``start_dist``.

    ``rng_seed`` may be an int or an existing ``Generator`` (consumed in place).
    """
    if horizon < 1:
        raise ContractError("horizon must be >= 1")
    rng = np.random.default_rng(rng_seed)
    policy = np.asarray(policy, dtype=float)
    # inverse-CDF draws from one block of uniforms: start, then (action, successor) pairs
    u = rng.random(2 * horizon + 1)
    states, actions = [], []
    s = _draw(mdp.start_dist, u[0])
    for t in range(horizon):
        a = _draw(policy[s], u[2 * t + 1])
        states.append(s)
        actions.append(a)
        s = _draw(mdp.transition[s, a], u[2 * t + 2])
    return Trajectory(tuple(states), tuple(actions), final_state=s)


def _draw(p: np.ndarray, u: float) -> int:
    cdf = np.cumsum(p)
    i = int(np.searchsorted(cdf, u * cdf[-1], side="right"))
    if i >= len(p) or p[i] <= 0:
        # rounding landed past the last positive entry
        i = int(np.flatnonzero(p > 0)[-1])
    return i


def trajectory_return(traj: Trajectory, reward: np.ndarray, discount: float) -> float:
    """Discounted sum of ``reward[s_t, a_t]`` along ``traj``."""
    reward = np.asarray(reward, dtype=float)
    s = np.asarray(traj.states, dtype=int)
    a = np.asarray(traj.actions, dtype=int)
    if len(s) == 0:
        return 0.0
    if reward.ndim == 1:
        reward = reward[:, None]
        a = np.zeros_like(a)
    if s.min() < 0 or s.max() >= reward.shape[0] or a.min() < 0 or a.max() >= reward.shape[1]:
        raise IndexError("trajectory index out of range for reward table")
    return float(np.sum(discount ** np.arange(len(s)) * reward[s, a]))
