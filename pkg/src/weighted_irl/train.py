"""Two-phase maximum-likelihood training of reward and temperature parameters.

Phase 1 fits the reward with all temperatures pinned at one (``psi = 0``).
Phase 2 starts from ``(theta_phase1, 0)`` and ascends both jointly. Both
phases use full-batch gradient ascent with a Barzilai-Borwein trial step
and Armijo backtracking, so every accepted step is monotone.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Callable

import numpy as np

from .features import FeatureMap
from .likelihood import _pair_counts, loglik_and_grads_from_counts
from .mdp import DemoSet, TabularMdp

log = logging.getLogger(__name__)


class LineSearchError(RuntimeError):
    """Backtracking failed to find an acceptable step."""

    def __init__(self, message: str, params: np.ndarray):
        super().__init__(message)
        self.params = params


@dataclass(frozen=True)
class TrainConfig:
    phase1_max_iters: int = 400
    phase2_max_iters: int = 400
    grad_tol: float = 1e-6
    l2_theta: float = 1e-4
    l2_psi: float = 1e-3
    armijo: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 50
    # accepted steps may lose up to this much (relative) to float noise
    noise_tol: float = 1e-12
    # backtracking that ends within this relative change counts as a stall
    stall_tol: float = 1e-9
    seed: int = 0

    def __post_init__(self):
        if self.grad_tol <= 0:
            raise ValueError("grad_tol must be positive")
        if self.l2_theta < 0 or self.l2_psi < 0:
            raise ValueError("regularization must be nonnegative")
        if self.phase1_max_iters < 0 or self.phase2_max_iters < 0:
            raise ValueError("iteration caps must be nonnegative")

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "TrainConfig":
        known = cls.__dataclass_fields__
        unknown = set(d) - set(known)
        if unknown:
            raise ValueError(f"unknown train config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class AscentResult:
    params: np.ndarray
    objective: float
    loglik: float
    iterations: int
    converged: bool
    objective_curve: list[float] = field(default_factory=list)
    loglik_curve: list[float] = field(default_factory=list)


Objective = Callable[[np.ndarray], tuple[float, np.ndarray, float]]


def gradient_ascent(
    fun: Objective,
    x0: np.ndarray,
    max_iters: int,
    config: TrainConfig,
    loglik_floor: float | None = None,
) -> AscentResult:
    """Maximize ``fun`` (returning objective, gradient, log-likelihood).

    Steps are accepted when the Armijo condition holds up to ``noise_tol``
    and, if ``loglik_floor`` is given, the log-likelihood stays above it.
    """
    x = np.array(x0, dtype=float)
    f, g, ll = fun(x)
    res = AscentResult(x, f, ll, 0, False, [f], [ll])
    gnorm = float(np.max(np.abs(g))) if g.size else 0.0
    step = 1.0 / max(gnorm, 1.0)
    x_prev = g_prev = None
    for it in range(1, max_iters + 1):
        if gnorm <= config.grad_tol:
            res.converged = True
            break
        if x_prev is not None:
            # Barzilai-Borwein step for ascent: s.s / -(s.y)
            s_vec, y_vec = x - x_prev, g - g_prev
            sy = -float(s_vec @ y_vec)
            if sy > 0:
                step = float(s_vec @ s_vec) / sy
        slack = config.noise_tol * (1.0 + abs(f))
        gg = float(g @ g)
        for _ in range(config.max_backtracks):
            x_new = x + step * g
            f_new, g_new, ll_new = fun(x_new)
            ok = np.isfinite(f_new) and f_new >= f + config.armijo * step * gg - slack
            if ok and loglik_floor is not None:
                ok = ll_new >= loglik_floor
            if ok:
                break
            step *= config.backtrack
        else:
            if np.isfinite(f_new) and abs(f_new - f) <= config.stall_tol * (1.0 + abs(f)):
                # no representable improvement left along the gradient
                res.converged = True
                break
            raise LineSearchError(
                f"line search failed after {config.max_backtracks} backtracks at iteration {it}",
                x,
            )
        x_prev, g_prev = x, g
        x, f, g, ll = x_new, f_new, g_new, ll_new
        gnorm = float(np.max(np.abs(g)))
        res.objective_curve.append(f)
        res.loglik_curve.append(ll)
        res.iterations = it
        if abs(f - res.objective_curve[-2]) <= slack and np.max(np.abs(x - x_prev)) <= 1e-12:
            res.converged = True
            break
    else:
        res.converged = gnorm <= config.grad_tol
    if gnorm <= config.grad_tol:
        res.converged = True
    res.params, res.objective, res.loglik = x, f, ll
    return res


class _Problem:
    """Penalized log-likelihood over a packed ``(theta, psi)`` vector."""

    def __init__(self, counts, mdp, features, weight_features, config, fit_psi, theta_fixed=None):
        self.counts = counts
        self.mdp = mdp
        self.features = features
        self.weight_features = weight_features
        self.config = config
        self.fit_psi = fit_psi
        self.n_theta = _dim(features)
        self.n_psi = _dim(weight_features)
        self.theta_fixed = theta_fixed
        self._value = None

    def split(self, x):
        if self.theta_fixed is not None:
            return self.theta_fixed, x
        theta = x[: self.n_theta]
        psi = x[self.n_theta:] if self.fit_psi else np.zeros(self.n_psi)
        return theta, psi

    def pack(self, theta, psi):
        if self.theta_fixed is not None:
            return np.asarray(psi, dtype=float)
        return np.concatenate([np.asarray(theta, dtype=float), psi])

    def __call__(self, x):
        theta, psi = self.split(x)
        ll, gt, gp, sol = loglik_and_grads_from_counts(
            self.counts, self.mdp, theta, psi, self.features, self.weight_features,
            init_value=self._value,
        )
        self._value = sol.value
        cfg = self.config
        obj = ll - cfg.l2_theta * float(theta @ theta)
        grad = gt - 2 * cfg.l2_theta * theta
        if self.fit_psi:
            obj -= cfg.l2_psi * float(psi @ psi)
            grad_psi = gp - 2 * cfg.l2_psi * psi
            grad = grad_psi if self.theta_fixed is not None else np.concatenate([grad, grad_psi])
        return obj, grad, ll


def _dim(features) -> int:
    return features.dim if isinstance(features, FeatureMap) else np.asarray(features).shape[-1]


@dataclass(frozen=True)
class TrainedModel:
    theta: np.ndarray
    psi: np.ndarray
    phase1_loglik: float
    phase2_loglik: float
    iterations: dict[str, int]
    feature_metadata: dict[str, Any]
    weight_feature_metadata: dict[str, Any]
    mode: str = "wmaxent"
    curves: dict[str, list[float]] = field(default_factory=dict)
    seed: int = 0
    converged: dict[str, bool] = field(default_factory=dict)

    @property
    def loglik(self) -> float:
        return self.phase2_loglik

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["theta"] = self.theta.tolist()
        d["psi"] = self.psi.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "TrainedModel":
        d = dict(d)
        d["theta"] = np.asarray(d["theta"], dtype=float)
        d["psi"] = np.asarray(d["psi"], dtype=float)
        return cls(**d)


def _metadata(features) -> dict[str, Any]:
    if isinstance(features, FeatureMap):
        return features.metadata()
    return {"names": [], "dim": _dim(features), "mode": "continuous"}


def fit_phase1(
    demos: DemoSet,
    mdp: TabularMdp,
    features,
    config: TrainConfig = TrainConfig(),
    weight_features=None,
) -> AscentResult:
    """Fit ``theta`` from zero with ``psi`` pinned at zero."""
    wf = features if weight_features is None else weight_features
    prob = _Problem(_pair_counts(demos, mdp), mdp, features, wf, config, fit_psi=False)
    res = gradient_ascent(prob, np.zeros(prob.n_theta), config.phase1_max_iters, config)
    log.debug("phase 1: %d iterations, loglik %.6f", res.iterations, res.loglik)
    return res


def fit_phase2(
    demos: DemoSet,
    mdp: TabularMdp,
    features,
    theta_init,
    config: TrainConfig = TrainConfig(),
    weight_features=None,
    phase1: AscentResult | None = None,
    fit_theta: bool = True,
) -> TrainedModel:
    """Jointly ascend ``(theta, psi)`` from ``(theta_init, 0)``.

    Steps never take the log-likelihood below its value at the start point,
    so the result dominates the Phase 1 fit it was warm-started from.
    ``fit_theta=False`` holds the reward at ``theta_init`` and fits only the
    temperatures, which pins the otherwise free common scale of (r, mu).
    """
    wf = features if weight_features is None else weight_features
    theta_init = np.asarray(theta_init, dtype=float)
    prob = _Problem(
        _pair_counts(demos, mdp), mdp, features, wf, config, fit_psi=True,
        theta_fixed=None if fit_theta else theta_init,
    )
    x0 = prob.pack(theta_init, np.zeros(prob.n_psi))
    start_ll = prob(x0)[2]
    res = gradient_ascent(
        prob, x0, config.phase2_max_iters, config, loglik_floor=start_ll - 1e-9
    )
    theta, psi = prob.split(res.params)
    p1_ll = phase1.loglik if phase1 is not None else start_ll
    return TrainedModel(
        theta=theta.copy(),
        psi=psi.copy(),
        phase1_loglik=p1_ll,
        phase2_loglik=res.loglik,
        iterations={
            "phase1": phase1.iterations if phase1 is not None else 0,
            "phase2": res.iterations,
        },
        feature_metadata=_metadata(features),
        weight_feature_metadata=_metadata(wf),
        mode="wmaxent",
        curves={
            "phase1": list(phase1.loglik_curve) if phase1 is not None else [],
            "phase2": res.loglik_curve,
        },
        seed=config.seed,
        converged={
            "phase1": phase1.converged if phase1 is not None else True,
            "phase2": res.converged,
        },
    )


def train_wmaxent(
    demos: DemoSet,
    mdp: TabularMdp,
    features,
    config: TrainConfig = TrainConfig(),
    weight_features=None,
    maxent_only: bool = False,
) -> TrainedModel:
    """Run both phases; ``maxent_only`` stops after Phase 1 (the MaxEnt baseline)."""
    wf = features if weight_features is None else weight_features
    p1 = fit_phase1(demos, mdp, features, config, wf)
    if maxent_only:
        return TrainedModel(
            theta=p1.params.copy(),
            psi=np.zeros(_dim(wf)),
            phase1_loglik=p1.loglik,
            phase2_loglik=p1.loglik,
            iterations={"phase1": p1.iterations, "phase2": 0},
            feature_metadata=_metadata(features),
            weight_feature_metadata=_metadata(wf),
            mode="maxent",
            curves={"phase1": p1.loglik_curve, "phase2": []},
            seed=config.seed,
            converged={"phase1": p1.converged, "phase2": True},
        )
    return fit_phase2(demos, mdp, features, p1.params, config, wf, phase1=p1)
