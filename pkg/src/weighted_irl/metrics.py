"""Evaluation: expected value difference, transfer, held-out likelihood, matching."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from .envs import EnvBundle
from .features import FeatureMap
from .likelihood import demo_loglik, solve_params
from .mdp import (
    ContractError,
    DemoSet,
    TabularMdp,
    as_reward_table,
    evaluate_policy,
    policy_return,
)
from .train import TrainedModel


def optimal_policy(mdp: TabularMdp, reward) -> np.ndarray:
    """Deterministic optimal policy by policy iteration (ties -> lowest action)."""
    reward = as_reward_table(reward, mdp)
    policy = np.zeros((mdp.n_states, mdp.n_actions))
    policy[:, 0] = 1.0
    for _ in range(10 * mdp.n_states * mdp.n_actions + 10):
        v = evaluate_policy(mdp, policy, reward)
        q = reward + mdp.discount * mdp.expect_next(v)
        current = np.argmax(policy, axis=1)
        best = q.max(axis=1)
        # keep the current action unless another is strictly better
        improve = q[np.arange(mdp.n_states), current] < best - 1e-12 * (1 + np.abs(best))
        if not improve.any():
            return policy
        greedy = np.argmax(q, axis=1)
        new_actions = np.where(improve, greedy, current)
        policy = np.zeros_like(policy)
        policy[np.arange(mdp.n_states), new_actions] = 1.0
    raise RuntimeError("policy iteration failed to stabilize")


def expected_value_difference(env: EnvBundle, learned_policy: np.ndarray) -> float:
    """Return gap under the true reward between the optimal and the learned policy."""
    learned_policy = np.asarray(learned_policy, dtype=float)
    if learned_policy.shape != (env.mdp.n_states, env.mdp.n_actions):
        raise ContractError(
            f"policy shape {learned_policy.shape} does not match environment "
            f"({env.mdp.n_states}, {env.mdp.n_actions})"
        )
    best = optimal_policy(env.mdp, env.true_reward)
    return policy_return(env.mdp, best, env.true_reward) - policy_return(
        env.mdp, learned_policy, env.true_reward
    )


def _check_dims(model: TrainedModel, features: FeatureMap, weight_features: FeatureMap):
    if model.theta.shape[0] != features.dim:
        raise ContractError(
            f"model expects {model.theta.shape[0]} reward features, environment has {features.dim}"
        )
    if model.psi.shape[0] != weight_features.dim:
        raise ContractError(
            f"model expects {model.psi.shape[0]} weight features, "
            f"environment has {weight_features.dim}"
        )


def model_policy(
    model: TrainedModel, mdp: TabularMdp, features: FeatureMap, weight_features=None
) -> np.ndarray:
    """Soft-optimal policy of the learned reward and temperatures."""
    wf = features if weight_features is None else weight_features
    _check_dims(model, features, wf)
    return solve_params(mdp, model.theta, model.psi, features, wf).policy


def transfer_eval(
    model: TrainedModel, fresh_env: EnvBundle, features=None, weight_features=None
) -> float:
    """Rebuild reward and temperatures on ``fresh_env``'s features, re-solve, score EVD.

    ``features`` / ``weight_features`` default to ``fresh_env.features``; pass
    them when the model was trained on a derived feature map.
    """
    features = fresh_env.features if features is None else features
    policy = model_policy(model, fresh_env.mdp, features, weight_features)
    return expected_value_difference(fresh_env, policy)


def greedy_rollout(mdp: TabularMdp, policy: np.ndarray, start: int, horizon: int) -> list[int]:
    """States visited by following argmax actions and most likely successors."""
    actions = np.argmax(policy, axis=1)
    states = [int(start)]
    for _ in range(horizon - 1):
        s = states[-1]
        states.append(int(np.argmax(mdp.transition[s, actions[s]])))
    return states


def matching_scores(test_demos: DemoSet, model_policy: np.ndarray, mdp: TabularMdp) -> tuple[float, float]:
    """Average and 90%-matching percentages of argmax rollouts against test paths.

    Each test trajectory is replayed from its start state by the model's
    argmax policy (ties to the lowest action, stochastic successors to the
    most likely state, ties to the lowest index). A trajectory's match is the
    fraction of timesteps whose states coincide.
    """
    if len(test_demos) == 0:
        raise ContractError("test demonstration set is empty")
    matches = []
    for traj in test_demos.trajectories:
        model_states = greedy_rollout(mdp, model_policy, traj.states[0], traj.length)
        matches.append(np.mean(np.asarray(model_states) == np.asarray(traj.states)))
    matches = np.asarray(matches)
    return float(100.0 * matches.mean()), float(100.0 * np.mean(matches >= 0.9))


def test_loglik(
    test_demos: DemoSet, model: TrainedModel, mdp: TabularMdp, features, weight_features=None
) -> float:
    """Log-likelihood of held-out demonstrations under the trained model."""
    return demo_loglik(test_demos, mdp, model.theta, model.psi, features, weight_features)


@dataclass
class EvalReport:
    algorithm: str
    env: str
    feature_mode: str
    n_demos: int
    seed: int
    evd: float
    transfer_evd: float | None
    test_loglik: float
    avg_matching: float
    p90_matching: float
    wall_seconds: float = 0.0
    train_loglik: float | None = None
    extra: dict[str, Any] = field(default_factory=dict)

    CSV_COLUMNS = (
        "algorithm",
        "env",
        "feature_mode",
        "n_demos",
        "seed",
        "evd",
        "transfer_evd",
        "test_loglik",
        "avg_matching",
        "p90_matching",
        "wall_seconds",
    )

    def csv_row(self) -> dict[str, Any]:
        return {k: getattr(self, k) for k in self.CSV_COLUMNS}

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def mean_stderr(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return float("nan"), float("nan")
    se = float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else 0.0
    return float(v.mean()), se
