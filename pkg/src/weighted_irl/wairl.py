"""Tabular weighted adversarial IRL.

The discriminator scores a transition with the disentangled reward

    f(s, a, s') = r(s, a) + gamma * h(s') - h(s)

against the policy density raised to the state temperature,

    D = exp(f) / (exp(f) + pi(a|s) ** mu(s)),

so that ``log D - log(1 - D) = f - mu(s) log pi(a|s)``, the per-step
weighted-entropy reward. ``form="exp"`` instead uses the literal
``exp(mu(s)) * pi(a|s)`` density, whose logit is ``f - mu - log pi``.

Each round samples generator rollouts, takes a few line-searched logistic
regression steps on the discriminator, and then re-solves the weighted soft
MDP on ``E_{s'}[f]`` with temperatures ``mu`` (an exact best response).
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np
from scipy.special import expit

from .features import FeatureMap
from .likelihood import weight_and_jacobian
from .mdp import ContractError, DemoSet, TabularMdp, policy_return, sample_trajectory
from .soft import solve_soft

LOGIT_CAP = 30.0


@dataclass(frozen=True)
class DiscParams:
    theta_r: np.ndarray
    delta_h: np.ndarray
    psi_mu: np.ndarray

    def to_dict(self) -> dict[str, Any]:
        return {
            "theta_r": self.theta_r.tolist(),
            "delta_h": self.delta_h.tolist(),
            "psi_mu": self.psi_mu.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(*(np.asarray(d[k], dtype=float) for k in ("theta_r", "delta_h", "psi_mu")))

    @classmethod
    def zeros(cls, n_states, n_actions, n_weight_features, state_only=False):
        shape = (n_states,) if state_only else (n_states, n_actions)
        return cls(np.zeros(shape), np.zeros(n_states), np.zeros(n_weight_features))

    def pack(self) -> np.ndarray:
        return np.concatenate([self.theta_r.ravel(), self.delta_h, self.psi_mu])

    def unpack(self, x: np.ndarray) -> "DiscParams":
        n1, n2 = self.theta_r.size, self.delta_h.size
        return DiscParams(
            x[:n1].reshape(self.theta_r.shape), x[n1:n1 + n2].copy(), x[n1 + n2:].copy()
        )


def _weight_features(weight_features, n_states) -> np.ndarray:
    if weight_features is None:
        return np.ones((n_states, 1))
    return weight_features.values if isinstance(weight_features, FeatureMap) else np.asarray(
        weight_features, dtype=float
    )


def reward_table(disc: DiscParams, n_actions: int) -> np.ndarray:
    r = disc.theta_r
    return np.repeat(r[:, None], n_actions, axis=1) if r.ndim == 1 else r


def disentangled_reward(disc: DiscParams, s, a, s2, discount: float) -> np.ndarray:
    r = disc.theta_r[s] if disc.theta_r.ndim == 1 else disc.theta_r[s, a]
    return r + discount * disc.delta_h[s2] - disc.delta_h[s]


def disc_logit(
    disc: DiscParams, policy, s, a, s2, discount: float, weight_features=None, form="power"
) -> np.ndarray:
    """``log D - log(1 - D)`` evaluated directly from ``f`` and the policy term."""
    policy = np.asarray(policy, dtype=float)
    s, a, s2 = (np.asarray(x, dtype=int) for x in (s, a, s2))
    pi = policy[s, a]
    if np.any(pi <= 0):
        raise ContractError("discriminator needs strictly positive policy probabilities")
    mu, _ = weight_and_jacobian(disc.psi_mu, _weight_features(weight_features, policy.shape[0]))
    f = disentangled_reward(disc, s, a, s2, discount)
    if form == "power":
        return f - mu[s] * np.log(pi)
    if form == "exp":
        return f - mu[s] - np.log(pi)
    raise ValueError(f"unknown discriminator form {form!r}")


def disc_log_probs(*args, **kwargs) -> tuple[np.ndarray, np.ndarray]:
    """``(log D, log(1 - D))`` computed stably from the logit."""
    x = disc_logit(*args, **kwargs)
    return -np.logaddexp(0.0, -x), -np.logaddexp(0.0, x)


def disc_prob(
    disc: DiscParams, policy, s, a, s2, discount: float, weight_features=None, form="power"
) -> np.ndarray:
    """Discriminator probability; the logit is capped at +-LOGIT_CAP so D stays in (0, 1)."""
    x = disc_logit(disc, policy, s, a, s2, discount, weight_features, form)
    return expit(np.clip(x, -LOGIT_CAP, LOGIT_CAP))


def shaped_reward(
    disc: DiscParams, policy, mdp: TabularMdp, weight_features=None
) -> np.ndarray:
    """``E_{s'}[f(s, a, s')] - mu(s) log pi(a|s)`` as an ``(S, A)`` table."""
    policy = np.asarray(policy, dtype=float)
    mu, _ = weight_and_jacobian(disc.psi_mu, _weight_features(weight_features, mdp.n_states))
    return expected_f(disc, mdp) - mu[:, None] * np.log(policy)


def expected_f(disc: DiscParams, mdp: TabularMdp) -> np.ndarray:
    """``E_{s'}[f(s, a, s')]`` as an ``(S, A)`` table."""
    r = reward_table(disc, mdp.n_actions)
    return r + mdp.discount * mdp.expect_next(disc.delta_h) - disc.delta_h[:, None]


@dataclass
class DiscUpdate:
    params: DiscParams
    losses: list[float]
    degenerate: bool = False


def _bce(disc, policy, batch, label, discount, wf, form, l2):
    """Mean binary cross-entropy of one labelled batch and its gradient."""
    s, a, s2 = batch
    x = disc_logit(disc, policy, s, a, s2, discount, wf, form)
    if label == 1:
        loss = np.mean(np.logaddexp(0.0, -x))
        dx = -expit(-x)
    else:
        loss = np.mean(np.logaddexp(0.0, x))
        dx = expit(x)
    dx = dx / len(s)
    g_r = np.zeros_like(disc.theta_r)
    if g_r.ndim == 1:
        np.add.at(g_r, s, dx)
    else:
        np.add.at(g_r, (s, a), dx)
    g_h = np.zeros_like(disc.delta_h)
    np.add.at(g_h, s2, discount * dx)
    np.add.at(g_h, s, -dx)
    _, dmu = weight_and_jacobian(disc.psi_mu, wf)
    coef = np.log(policy[s, a]) if form == "power" else np.ones(len(s))
    g_psi = -(dx * coef) @ dmu[s]
    return loss, np.concatenate([g_r.ravel(), g_h, g_psi])


def disc_loss_and_grad(
    disc: DiscParams,
    expert_batch,
    gen_batch,
    policy,
    discount: float,
    weight_features=None,
    form: str = "power",
    l2: float = 0.0,
) -> tuple[float, np.ndarray]:
    """Class-balanced cross-entropy (expert = 1, generated = 0) plus L2, and its gradient."""
    policy = np.asarray(policy, dtype=float)
    wf = _weight_features(weight_features, policy.shape[0])
    le, ge = _bce(disc, policy, expert_batch, 1, discount, wf, form, l2)
    lg, gg = _bce(disc, policy, gen_batch, 0, discount, wf, form, l2)
    x = disc.pack()
    return 0.5 * (le + lg) + l2 * float(x @ x), 0.5 * (ge + gg) + 2 * l2 * x


def disc_update(
    disc: DiscParams,
    expert_batch,
    gen_batch,
    policy,
    discount: float,
    weight_features=None,
    steps: int = 5,
    step_size: float = 1.0,
    l2: float = 1e-3,
    form: str = "power",
    fit_weights: bool = True,
) -> DiscUpdate:
    """Line-searched gradient descent on the discriminator cross-entropy.

    Identical expert and generated batches are flagged (and warned about):
    the only optimum is ``D = 0.5`` on every pair.
    """
    if len(expert_batch[0]) == 0 or len(gen_batch[0]) == 0:
        raise ContractError("both batches must be nonempty")
    degenerate = all(
        np.array_equal(x, y)
        for x, y in zip(_sorted_triples(expert_batch), _sorted_triples(gen_batch))
    )
    if degenerate:
        warnings.warn("expert and generated batches are identical", RuntimeWarning, stacklevel=2)

    n_psi = disc.psi_mu.size

    def fun(x):
        f, g = disc_loss_and_grad(
            disc.unpack(x), expert_batch, gen_batch, policy, discount, weight_features, form, l2
        )
        if not fit_weights and n_psi:
            g[-n_psi:] = 0.0
        return f, g

    x = disc.pack()
    f, g = fun(x)
    losses = [f]
    step = step_size
    for _ in range(steps):
        gg = float(g @ g)
        if gg == 0.0:
            break
        for _ in range(50):
            x_new = x - step * g
            f_new, g_new = fun(x_new)
            if f_new <= f - 1e-4 * step * gg:
                break
            step *= 0.5
        else:
            break
        x, f, g = x_new, f_new, g_new
        losses.append(f)
        step *= 2.0
    return DiscUpdate(disc.unpack(x), losses, degenerate)


def _sorted_triples(batch):
    s, a, s2 = (np.asarray(v, dtype=int) for v in batch)
    order = np.lexsort((s2, a, s))
    return s[order], a[order], s2[order]


@dataclass(frozen=True)
class WairlConfig:
    n_rounds: int = 200
    gen_trajs: int = 16
    disc_steps: int = 5
    disc_step_size: float = 1.0
    disc_l2: float = 1e-4
    state_only: bool = False
    fit_weights: bool = True
    form: str = "power"
    # fraction of final rounds whose discriminator iterates are averaged
    # into the returned state; 0 returns the last iterate
    average_tail: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.n_rounds < 0:
            raise ValueError("n_rounds must be nonnegative")
        if self.gen_trajs < 1 or self.disc_steps < 1:
            raise ValueError("gen_trajs and disc_steps must be positive")
        if self.form not in ("power", "exp"):
            raise ValueError(f"form must be 'power' or 'exp', got {self.form!r}")
        if not 0.0 <= self.average_tail <= 1.0:
            raise ValueError("average_tail must lie in [0, 1]")

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown wairl config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class AdversarialState:
    disc: DiscParams
    policy: np.ndarray
    iteration: int = 0
    disc_loss_history: list[float] = field(default_factory=list)
    policy_return_history: list[float] = field(default_factory=list)

    def weights(self, weight_features=None) -> np.ndarray:
        wf = _weight_features(weight_features, self.policy.shape[0])
        return weight_and_jacobian(self.disc.psi_mu, wf)[0]

    def to_dict(self, weight_features=None, mdp: TabularMdp | None = None) -> dict[str, Any]:
        d = {
            "disc": self.disc.to_dict(),
            "policy": self.policy.tolist(),
            "iteration": self.iteration,
            "disc_loss_history": self.disc_loss_history,
            "policy_return_history": self.policy_return_history,
            "mu": self.weights(weight_features).tolist(),
        }
        if mdp is not None:
            d["f_table"] = expected_f(self.disc, mdp).tolist()
        return d

    @classmethod
    def from_dict(cls, d) -> "AdversarialState":
        return cls(
            DiscParams.from_dict(d["disc"]),
            np.asarray(d["policy"], dtype=float),
            int(d["iteration"]),
            list(d["disc_loss_history"]),
            list(d["policy_return_history"]),
        )


def policy_from_disc(disc: DiscParams, mdp: TabularMdp, weight_features=None) -> np.ndarray:
    """Weighted soft-optimal policy for reward ``E_{s'}[f]`` and temperatures ``mu``."""
    mu, _ = weight_and_jacobian(disc.psi_mu, _weight_features(weight_features, mdp.n_states))
    policy = solve_soft(mdp, expected_f(disc, mdp), mu).policy
    # soft policies are positive in exact arithmetic; undo exp underflow so
    # the discriminator's log pi stays finite
    policy = np.maximum(policy, np.finfo(float).tiny)
    return policy / policy.sum(axis=1, keepdims=True)


def wairl_train(
    mdp: TabularMdp,
    demos: DemoSet,
    config: WairlConfig = WairlConfig(),
    weight_features=None,
    eval_reward=None,
) -> AdversarialState:
    """Run ``config.n_rounds`` adversarial rounds from a uniform policy.

    ``policy_return_history`` tracks the policy's return under ``eval_reward``
    when given, otherwise under the current learned reward ``E_{s'}[f]``.
    """
    if len(demos) == 0:
        raise ContractError("demonstration set is empty")
    wf = _weight_features(weight_features, mdp.n_states)
    expert_batch = demos.transitions()
    disc = DiscParams.zeros(mdp.n_states, mdp.n_actions, wf.shape[1], config.state_only)
    state = AdversarialState(disc, np.full((mdp.n_states, mdp.n_actions), 1.0 / mdp.n_actions))
    rng = np.random.default_rng(config.seed)
    n_avg = int(config.average_tail * config.n_rounds)
    tail_sum = None
    for it in range(1, config.n_rounds + 1):
        gen = DemoSet(
            tuple(
                sample_trajectory(mdp, state.policy, demos.horizon, rng)
                for _ in range(config.gen_trajs)
            ),
            config.seed,
            demos.horizon,
        )
        upd = disc_update(
            state.disc,
            expert_batch,
            gen.transitions(),
            state.policy,
            mdp.discount,
            wf,
            steps=config.disc_steps,
            step_size=config.disc_step_size,
            l2=config.disc_l2,
            form=config.form,
            fit_weights=config.fit_weights,
        )
        disc = upd.params
        policy = policy_from_disc(disc, mdp, wf)
        target = expected_f(disc, mdp) if eval_reward is None else eval_reward
        state = AdversarialState(
            disc,
            policy,
            it,
            state.disc_loss_history + [upd.losses[-1]],
            state.policy_return_history + [policy_return(mdp, policy, target)],
        )
        if it > config.n_rounds - n_avg:
            tail_sum = disc.pack() if tail_sum is None else tail_sum + disc.pack()
    if tail_sum is not None:
        avg = state.disc.unpack(tail_sum / n_avg)
        state = AdversarialState(
            avg,
            policy_from_disc(avg, mdp, wf),
            state.iteration,
            state.disc_loss_history,
            state.policy_return_history,
        )
    return state
