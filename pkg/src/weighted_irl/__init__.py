"""Weighted maximum-entropy inverse reinforcement learning on tabular MDPs.

State-dependent entropy weights (temperatures) ``mu(s)`` generalize
maximum-entropy IRL: the soft policy is ``softmax(Q(s, .) / mu(s))`` and
both the reward and the temperatures are fitted by maximum likelihood.
"""

from .envs import (
    EnvBundle,
    HighwaySpec,
    ObjectworldSpec,
    gen_highway,
    gen_objectworld,
    make_expert,
    sample_demos,
)
from .features import FeatureMap, discretize_features
from .likelihood import demo_loglik, demo_loglik_grads, solve_params, value_and_grads
from .mdp import ContractError, DemoSet, TabularMdp, Trajectory, validate_mdp
from .metrics import EvalReport, expected_value_difference, transfer_eval
from .soft import ConvergenceError, SoftSolution, soft_backup, solve_soft
from .train import TrainConfig, TrainedModel, train_wmaxent
from .wairl import AdversarialState, WairlConfig, wairl_train

__all__ = [
    "AdversarialState",
    "ContractError",
    "ConvergenceError",
    "DemoSet",
    "EnvBundle",
    "EvalReport",
    "FeatureMap",
    "HighwaySpec",
    "ObjectworldSpec",
    "SoftSolution",
    "TabularMdp",
    "TrainConfig",
    "TrainedModel",
    "Trajectory",
    "WairlConfig",
    "demo_loglik",
    "demo_loglik_grads",
    "discretize_features",
    "expected_value_difference",
    "gen_highway",
    "gen_objectworld",
    "make_expert",
    "sample_demos",
    "soft_backup",
    "solve_params",
    "solve_soft",
    "train_wmaxent",
    "transfer_eval",
    "validate_mdp",
    "value_and_grads",
    "wairl_train",
]
