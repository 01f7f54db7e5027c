"""Weighted soft Bellman operator and its fixed point.

With a state-dependent temperature ``mu(s)`` the backup is

    T[V](s) = mu(s) * log sum_a exp(Q(s, a) / mu(s)),
    Q(s, a) = r(s, a) + gamma * E_{s'}[V(s')],

and the optimal policy is ``softmax(Q(s, .) / mu(s))``. Every exponential is
taken after subtracting the row maximum.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from .mdp import ContractError, TabularMdp, as_reward_table, discounted_state_occupancy

MU_MIN = 1e-3
MU_MAX = 1e3
DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 10_000


class ConvergenceError(RuntimeError):
    """Fixed-point iteration hit its iteration cap."""

    def __init__(self, message: str, residual: float, value: np.ndarray | None = None):
        super().__init__(message)
        self.residual = residual
        self.value = value


def check_weights(weights, n_states: int) -> np.ndarray:
    """Broadcast scalars to ``(S,)`` and enforce ``[MU_MIN, MU_MAX]``."""
    w = np.broadcast_to(np.asarray(weights, dtype=float), (n_states,)).copy()
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise ContractError("weights must be finite and strictly positive")
    if np.any(w < MU_MIN * (1 - 1e-12)) or np.any(w > MU_MAX * (1 + 1e-12)):
        raise ContractError(f"weights must lie in [{MU_MIN}, {MU_MAX}]")
    return w


def clamp_weights(weights: np.ndarray) -> np.ndarray:
    return np.clip(weights, MU_MIN, MU_MAX)


def logsumexp_rows(x: np.ndarray) -> np.ndarray:
    m = np.max(x, axis=-1, keepdims=True)
    return (m + np.log(np.sum(np.exp(x - m), axis=-1, keepdims=True)))[..., 0]


def softmax_rows(x: np.ndarray) -> np.ndarray:
    z = np.exp(x - np.max(x, axis=-1, keepdims=True))
    return z / z.sum(axis=-1, keepdims=True)


def q_values(value: np.ndarray, reward: np.ndarray, mdp: TabularMdp) -> np.ndarray:
    return reward + mdp.discount * mdp.expect_next(value)


def _backup(value, reward, weights, mdp):
    q = q_values(value, reward, mdp)
    return weights * logsumexp_rows(q / weights[:, None]), q


def soft_backup(value, reward, weights, mdp: TabularMdp) -> np.ndarray:
    """One application of the weighted soft Bellman operator.

    Args:
        value: ``(S,)`` current value estimate.
        reward: ``(S, A)`` or state-only ``(S,)`` reward.
        weights: ``(S,)`` temperatures (or a scalar).
        mdp: the MDP supplying transitions and discount.

    Returns:
        ``(S,)`` array ``T[value]``.
    """
    value = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(value)):
        raise ContractError("value must be finite")
    reward = as_reward_table(reward, mdp)
    weights = check_weights(weights, mdp.n_states)
    return _backup(value, reward, weights, mdp)[0]


def soft_policy(q_table: np.ndarray, weights) -> np.ndarray:
    """Row-wise ``softmax(Q / mu)``; strictly positive unless it underflows."""
    q_table = np.asarray(q_table, dtype=float)
    weights = check_weights(weights, q_table.shape[0])
    return softmax_rows(q_table / weights[:, None])


@dataclass(frozen=True)
class SoftSolution:
    value: np.ndarray
    q_table: np.ndarray
    policy: np.ndarray
    weights: np.ndarray
    iterations: int
    residual: float

    def log_policy(self) -> np.ndarray:
        """``(Q - V) / mu``, the exact log of ``policy`` at the fixed point."""
        return (self.q_table - self.value[:, None]) / self.weights[:, None]

    def to_dict(self) -> dict[str, Any]:
        return {
            "value": self.value.tolist(),
            "q_table": self.q_table.tolist(),
            "policy": self.policy.tolist(),
            "weights": self.weights.tolist(),
            "iterations": self.iterations,
            "residual": self.residual,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "SoftSolution":
        return cls(
            value=np.asarray(d["value"], dtype=float),
            q_table=np.asarray(d["q_table"], dtype=float),
            policy=np.asarray(d["policy"], dtype=float),
            weights=np.asarray(d["weights"], dtype=float),
            iterations=int(d["iterations"]),
            residual=float(d["residual"]),
        )


def solve_soft(
    mdp: TabularMdp,
    reward,
    weights,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    init_value: np.ndarray | None = None,
) -> SoftSolution:
    """Synchronous soft value iteration to ``||T[V] - V||_inf <= tol``.

    The returned ``value`` is the last iterate ``V`` (not ``T[V]``), so
    ``q_table`` and ``policy`` are assembled from the same ``V`` and
    ``log(policy) == (Q - V) / mu`` holds up to ``tol / mu``.

    Raises:
        ConvergenceError: if ``max_iter`` sweeps do not reach ``tol``.
    """
    if tol <= 0:
        raise ContractError("tol must be positive")
    reward = as_reward_table(reward, mdp)
    weights = check_weights(weights, mdp.n_states)
    v = np.zeros(mdp.n_states) if init_value is None else np.array(init_value, dtype=float)
    residual = np.inf
    for it in range(1, max_iter + 1):
        tv, _ = _backup(v, reward, weights, mdp)
        residual = float(np.max(np.abs(tv - v)))
        if residual <= tol:
            # V is within tol of T[V]; take the final sweep for a tighter fixed point.
            v = tv
            tv, _ = _backup(v, reward, weights, mdp)
            residual = float(np.max(np.abs(tv - v)))
            break
        v = tv
    else:
        raise ConvergenceError(
            f"soft value iteration did not converge in {max_iter} sweeps "
            f"(residual {residual:.3e})",
            residual,
            v,
        )
    q = q_values(v, reward, mdp)
    lse = logsumexp_rows(q / weights[:, None])
    policy = np.exp(q / weights[:, None] - lse[:, None])
    return SoftSolution(v, q, policy, weights, it, residual)


def kl_to_uniform(policy_row) -> float:
    """KL(pi || uniform) with the convention 0 * log 0 = 0."""
    p = np.asarray(policy_row, dtype=float)
    nz = p > 0
    return float(max(np.sum(p[nz] * np.log(p[nz] * p.size)), 0.0))


def kl_rows(policy: np.ndarray) -> np.ndarray:
    p = np.asarray(policy, dtype=float)
    logs = np.log(np.where(p > 0, p * p.shape[1], 1.0))
    return np.maximum(np.sum(p * logs, axis=1), 0.0)


def weighted_kl_budget(mdp: TabularMdp, policy: np.ndarray, weights) -> float:
    """Discounted expectation of ``mu(s) * KL(pi(.|s) || uniform)`` from the start."""
    weights = check_weights(weights, mdp.n_states)
    d = discounted_state_occupancy(mdp, policy)
    return float(np.sum(d * weights * kl_rows(policy)))
