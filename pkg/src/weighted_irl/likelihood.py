"""Demonstration log-likelihood under the weighted soft policy and its gradients.

Rewards are linear in the features, ``r(s, a) = theta . phi(s[, a])``, and
temperatures are log-linear, ``mu(s) = clip(exp(psi . phi_w(s)), MU_MIN, MU_MAX)``.

Two gradient routes are provided. ``value_and_grads`` runs the joint
value/gradient fixed-point iteration, propagating dV/dtheta and dV/dpsi
alongside V. ``demo_loglik_grads(method="adjoint")`` differentiates the
converged fixed point implicitly with a single linear solve; it is what the
trainers use on larger grids.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .features import FeatureMap
from .mdp import ContractError, DemoSet, TabularMdp, check_pairs, state_transition
from .soft import (
    DEFAULT_MAX_ITER,
    MU_MAX,
    MU_MIN,
    ConvergenceError,
    SoftSolution,
    logsumexp_rows,
    solve_soft,
)

LOGLIK_TOL = 1e-11


def _features_array(features) -> np.ndarray:
    return features.values if isinstance(features, FeatureMap) else np.asarray(features, float)


def reward_features(features, n_actions: int) -> np.ndarray:
    """Reward feature tensor broadcast to ``(S, A, F)``."""
    phi = _features_array(features)
    if phi.ndim == 2:
        phi = np.broadcast_to(phi[:, None, :], (phi.shape[0], n_actions, phi.shape[1]))
    return phi


def reward_of(theta, features, n_actions: int | None = None) -> np.ndarray:
    """Linear reward table ``theta . phi``.

    State-only features give an ``(S,)`` reward unless ``n_actions`` is passed,
    in which case it is broadcast to ``(S, A)``.
    """
    theta = np.asarray(theta, dtype=float)
    phi = _features_array(features)
    if theta.shape != (phi.shape[-1],):
        raise ContractError(f"theta has shape {theta.shape}, features have dim {phi.shape[-1]}")
    r = phi @ theta
    if r.ndim == 1 and n_actions is not None:
        r = np.repeat(r[:, None], n_actions, axis=1)
    return r


def weight_and_jacobian(psi, features) -> tuple[np.ndarray, np.ndarray]:
    """Temperatures ``mu(s)`` and ``d mu(s) / d psi_i`` (zero where clamped)."""
    psi = np.asarray(psi, dtype=float)
    phi = _features_array(features)
    if phi.ndim != 2:
        raise ContractError("weight features must be per-state (2-D)")
    if psi.shape != (phi.shape[1],):
        raise ContractError(f"psi has shape {psi.shape}, features have dim {phi.shape[1]}")
    raw = np.exp(np.clip(phi @ psi, -700, 700))
    mu = np.clip(raw, MU_MIN, MU_MAX)
    free = (raw > MU_MIN) & (raw < MU_MAX)
    return mu, np.where(free[:, None], phi * mu[:, None], 0.0)


def weight_of(psi, features) -> np.ndarray:
    """Temperatures ``clip(exp(psi . phi(s)), MU_MIN, MU_MAX)``."""
    return weight_and_jacobian(psi, features)[0]


@dataclass(frozen=True)
class GradientBundle:
    value: np.ndarray
    dv_dtheta: np.ndarray
    dv_dpsi: np.ndarray
    residual: float
    iterations: int


def value_and_grads(
    mdp: TabularMdp,
    theta,
    psi,
    features,
    tol: float = 1e-10,
    weight_features=None,
    max_iter: int = DEFAULT_MAX_ITER,
) -> GradientBundle:
    """Jointly iterate ``V <- T[V]`` and its parameter derivatives from zero.

    Per sweep, with ``pi = softmax(Q / mu)`` evaluated max-shifted:

        dT/dtheta_i = sum_a pi (dr/dtheta_i + gamma E[dV/dtheta_i])
        dT/dpsi_i   = dmu_i T / mu + mu sum_a pi U_i,
        U_i         = gamma E[dV/dpsi_i] / mu - Q dmu_i / mu^2

    Stops once ``||T[V] - V||_inf <= tol``; the derivative iterates contract
    at the same rate ``gamma``.
    """
    if tol <= 0:
        raise ContractError("tol must be positive")
    wf = features if weight_features is None else weight_features
    phi_r = reward_features(features, mdp.n_actions)
    reward = reward_of(theta, features, mdp.n_actions)
    mu, dmu = weight_and_jacobian(psi, wf)
    g = mdp.discount
    mu_col = mu[:, None]

    v = np.zeros(mdp.n_states)
    dv_t = np.zeros((mdp.n_states, phi_r.shape[-1]))
    dv_p = np.zeros((mdp.n_states, dmu.shape[1]))
    for it in range(1, max_iter + 1):
        q = reward + g * mdp.expect_next(v)
        lse = logsumexp_rows(q / mu_col)
        pi = np.exp(q / mu_col - lse[:, None])
        tv = mu * lse
        residual = float(np.max(np.abs(tv - v)))

        new_dv_t = np.einsum("sa,saf->sf", pi, phi_r + g * mdp.expect_next(dv_t))
        u = g * mdp.expect_next(dv_p) / mu[:, None, None] - q[:, :, None] * (
            dmu / mu_col**2
        )[:, None, :]
        new_dv_p = dmu * (tv / mu)[:, None] + mu_col * np.einsum("sa,saf->sf", pi, u)

        v, dv_t, dv_p = tv, new_dv_t, new_dv_p
        if residual <= tol:
            break
    else:
        raise ConvergenceError(
            f"value/gradient iteration did not converge in {max_iter} sweeps", residual, v
        )
    return GradientBundle(v, dv_t, dv_p, residual, it)


def _pair_counts(demos: DemoSet, mdp: TabularMdp) -> np.ndarray:
    s, a = check_pairs(demos, mdp)
    counts = np.zeros((mdp.n_states, mdp.n_actions))
    np.add.at(counts, (s, a), 1.0)
    return counts


def solve_params(
    mdp: TabularMdp,
    theta,
    psi,
    features,
    weight_features=None,
    tol: float = LOGLIK_TOL,
    init_value=None,
) -> SoftSolution:
    """``solve_soft`` on the parameterized reward and temperatures."""
    wf = features if weight_features is None else weight_features
    return solve_soft(
        mdp,
        reward_of(theta, features, mdp.n_actions),
        weight_of(psi, wf),
        tol=tol,
        init_value=init_value,
    )


def loglik_from_counts(counts: np.ndarray, sol: SoftSolution) -> float:
    return float(np.sum(counts * sol.log_policy()))


def demo_loglik(
    demos: DemoSet, mdp: TabularMdp, theta, psi, features, weight_features=None,
    tol: float = LOGLIK_TOL,
) -> float:
    """``sum over demo pairs of (Q(s, a) - V(s)) / mu(s)``, i.e. ``sum log pi(a|s)``."""
    counts = _pair_counts(demos, mdp)
    return loglik_from_counts(counts, solve_params(mdp, theta, psi, features, weight_features, tol))


def loglik_and_grads_from_counts(
    counts: np.ndarray,
    mdp: TabularMdp,
    theta,
    psi,
    features,
    weight_features=None,
    tol: float = LOGLIK_TOL,
    init_value=None,
) -> tuple[float, np.ndarray, np.ndarray, SoftSolution]:
    """Log-likelihood and its gradients by implicit differentiation.

    At the fixed point ``(I - gamma P_pi) dV = B`` with
    ``B_theta = sum_a pi dr`` and ``B_psi = dmu * H`` (``H`` the policy
    entropy), so the ``dV`` contribution to the gradient collapses to one
    adjoint solve ``(I - gamma P_pi)^T lam = w``.
    """
    wf = features if weight_features is None else weight_features
    phi_r = reward_features(features, mdp.n_actions)
    mu, dmu = weight_and_jacobian(psi, wf)
    sol = solve_soft(
        mdp, reward_of(theta, features, mdp.n_actions), mu, tol=tol, init_value=init_value
    )
    logpi = sol.log_policy()
    loglik = float(np.sum(counts * logpi))

    # d loglik / dV = sum_{s,a} N(s,a) / mu(s) * (gamma q(.|s,a) - e_s)
    scaled = counts / mu[:, None]
    w = mdp.discount * scaled.reshape(-1) @ mdp.flat_transition - scaled.sum(axis=1)
    p_pi = state_transition(mdp, sol.policy)
    lam = np.linalg.solve((np.eye(mdp.n_states) - mdp.discount * p_pi).T, w)

    b_theta = np.einsum("sa,saf->sf", sol.policy, phi_r)
    entropy = -np.sum(sol.policy * np.log(np.maximum(sol.policy, 1e-300)), axis=1)
    b_psi = dmu * entropy[:, None]

    grad_theta = np.einsum("sa,saf->f", scaled, phi_r) + lam @ b_theta
    adv = sol.q_table - sol.value[:, None]
    grad_psi = lam @ b_psi - np.sum(counts * adv, axis=1) @ (dmu / mu[:, None] ** 2)
    return loglik, grad_theta, grad_psi, sol


def demo_loglik_grads(
    demos: DemoSet,
    mdp: TabularMdp,
    theta,
    psi,
    features,
    weight_features=None,
    method: str = "adjoint",
    tol: float = LOGLIK_TOL,
) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of ``demo_loglik`` with respect to ``theta`` and ``psi``.

    Args:
        method: ``"iterative"`` assembles them from :func:`value_and_grads`;
            ``"adjoint"`` uses one linear solve at the converged fixed point.

    Returns:
        ``(grad_theta, grad_psi)``.
    """
    counts = _pair_counts(demos, mdp)
    if method == "adjoint":
        _, gt, gp, _ = loglik_and_grads_from_counts(
            counts, mdp, theta, psi, features, weight_features, tol
        )
        return gt, gp
    if method != "iterative":
        raise ValueError(f"unknown gradient method {method!r}")

    wf = features if weight_features is None else weight_features
    bundle = value_and_grads(mdp, theta, psi, features, tol, weight_features=wf)
    phi_r = reward_features(features, mdp.n_actions)
    mu, dmu = weight_and_jacobian(psi, wf)
    g = mdp.discount
    scaled = counts / mu[:, None]

    # per pair: (dr + gamma E[dV(s')] - dV(s)) / mu(s)
    d_adv_t = phi_r + g * mdp.expect_next(bundle.dv_dtheta) - bundle.dv_dtheta[:, None, :]
    grad_theta = np.einsum("sa,saf->f", scaled, d_adv_t)

    reward = reward_of(theta, features, mdp.n_actions)
    adv = reward + g * mdp.expect_next(bundle.value) - bundle.value[:, None]
    d_adv_p = g * mdp.expect_next(bundle.dv_dpsi) - bundle.dv_dpsi[:, None, :]
    grad_psi = np.einsum("sa,saf->f", scaled, d_adv_p) - np.einsum(
        "sa,sf->f", counts * adv, dmu / mu[:, None] ** 2
    )
    return grad_theta, grad_psi
