"""Backward-inductive training of the particle ensembles by noisy SGD.

Each backward stage t runs the interacting-particle update

    theta_j <- theta_j - eta_k * [ grad_j(r * R_t) + (1/(2 beta^2)) grad Gamma(theta_j) ]
               + (sigma / beta) * sqrt(eta_k) * xi_j,      xi_j ~ N(0, I),

with future ensembles frozen (they propagate state sensitivity only).  The
regularisation potential Gamma defines the Gibbs reference measure
gamma(theta) ~ exp(-Gamma(theta) / sigma^2); with zero cost the update
samples from it, which gives the stationarity sanity check used in tests.
Unregularised mode drops both the Gamma term and the noise, leaving plain
gradient descent on r * R_t.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import nets, rollout
from .envs import ControlProblem, Dataset


class NonFiniteGradientError(RuntimeError):
    """Training produced a non-finite gradient."""

    def __init__(self, stage, epoch, norm):
        self.stage = stage
        self.epoch = epoch
        self.norm = norm
        super().__init__(
            f"non-finite gradient at stage {stage}, epoch {epoch} (norm {norm})")


@dataclass(frozen=True)
class RegSpec:
    """Regularisation: Gibbs scale sigma, inverse strength beta, potential Gamma."""

    sigma: float = 100.0
    beta: float = 100.0
    gamma_kind: str = "quadratic"       # or "quadratic_plus_exp"
    epsilon: float = 0.0

    def __post_init__(self):
        if self.sigma <= 0 or self.beta <= 0:
            raise ValueError("sigma and beta must be positive")
        if self.gamma_kind not in ("quadratic", "quadratic_plus_exp"):
            raise ValueError(f"unknown gamma_kind {self.gamma_kind!r}")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")

    @property
    def strength(self) -> float:
        """Effective regularisation strength sigma^2 / (2 beta^2)."""
        return self.sigma ** 2 / (2.0 * self.beta ** 2)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100_000
    lr_max: float = 0.1
    lr_min: float = 1e-5
    width: int = 50
    reg: RegSpec = field(default_factory=RegSpec)
    regularised: bool = True
    seed: int = 0
    activation: str = "tanh"
    init_scale: float = 1.0
    beta_n_scaling: bool = False        # beta <- beta * n^(1/4)
    max_loss_abort: float | None = None

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.lr_max >= self.lr_min > 0:
            raise ValueError("need lr_max >= lr_min > 0")
        if self.width < 1:
            raise ValueError("width must be >= 1")


def cosine_lr(k, t_tau, lr_max, lr_min) -> float:
    """Cosine annealing: lr_min + (lr_max - lr_min)(1 + cos(pi k / T_tau)) / 2."""
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + np.cos(np.pi * k / t_tau))


def gamma_value(theta, reg: RegSpec):
    """Gamma(theta) per particle row: |theta|^2 (+ eps exp|theta|)."""
    theta = np.atleast_2d(theta)
    sq = np.sum(theta * theta, axis=1)
    if reg.gamma_kind == "quadratic":
        return sq
    return sq + reg.epsilon * np.exp(np.sqrt(sq))


def gamma_grad(theta, reg: RegSpec):
    """Gradient of Gamma, rows matching theta; zero at the origin for the
    exponential term."""
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    g = 2.0 * theta
    if reg.gamma_kind == "quadratic_plus_exp":
        norms = np.linalg.norm(theta, axis=1)
        nz = norms > 0
        coef = np.zeros_like(norms)
        coef[nz] = reg.epsilon * np.exp(norms[nz]) / norms[nz]
        g = g + coef[:, None] * theta
    return g


def sgd_epoch(problem: ControlProblem, gibbs: rollout.GibbsVector, t, paths,
              config: TrainConfig, k, rng):
    """One noisy-SGD epoch on the time-t ensemble (updated in place).

    Returns (ensemble, batch_risk, lr, grad_norm) for telemetry.
    """
    ens = gibbs.get(t)
    risk, (da, dw, db) = rollout.risk_and_grad(problem, gibbs, t=t, paths=paths)
    eta = cosine_lr(k, config.epochs, config.lr_max, config.lr_min)
    grad = np.hstack([da, dw, db[:, None]])
    gnorm = float(np.sqrt(np.sum(grad * grad)))
    if not np.isfinite(gnorm):
        raise NonFiniteGradientError(t, k, gnorm)

    theta = ens.theta()
    if config.regularised:
        reg = config.reg
        grad = grad + gamma_grad(theta, reg) / (2.0 * reg.beta ** 2)
        noise = (reg.sigma / reg.beta) * np.sqrt(eta) * rng.standard_normal(theta.shape)
        theta = theta - eta * grad + noise
    else:
        theta = theta - eta * grad
    ens.set_theta(theta)
    return ens, risk, eta, gnorm


def _stage_rngs(seed, stages):
    """One independent stream per backward stage, split from the config seed."""
    children = np.random.SeedSequence(seed).spawn(len(stages))
    return {t: np.random.default_rng(s) for t, s in zip(stages, children)}


def gibbs_train(problem: ControlProblem, dataset, config: TrainConfig,
                telemetry_path=None, checkpoint_dir=None) -> rollout.GibbsVector:
    """Full backward induction over the trainable steps (Gibbs Vector Algorithm).

    dataset may be a Dataset or a raw (n, T, env_dim) path array.  Each stage
    initialises a fresh ensemble, runs config.epochs noisy-SGD epochs with the
    later ensembles frozen, then moves one step back.
    """
    paths = dataset.train if isinstance(dataset, Dataset) else np.asarray(dataset)
    if paths.shape[0] == 0:
        raise ValueError("training paths must be nonempty")

    config = _apply_beta_scaling(config, paths.shape[0])
    stages = sorted(problem.trainable_steps, reverse=True)
    rngs = _stage_rngs(config.seed, stages)
    gibbs = rollout.GibbsVector(problem.horizon)

    telemetry = open(telemetry_path, "w", newline="") if telemetry_path else None
    if telemetry:
        telemetry.write("stage,epoch,batch_risk,lr,grad_norm\n")
    try:
        for t in stages:
            rng = rngs[t]
            ens = nets.init_ensemble(
                config.width, problem.state_dim, problem.control_dim, rng,
                activation=config.activation,
                w_scale=config.init_scale, b_scale=config.init_scale)
            gibbs.set(t, ens)
            for k in range(config.epochs):
                _, risk, eta, gnorm = sgd_epoch(problem, gibbs, t, paths, config, k, rng)
                if telemetry:
                    telemetry.write(f"{t},{k},{risk:.17g},{eta:.17g},{gnorm:.17g}\n")
                if config.max_loss_abort is not None and risk > config.max_loss_abort:
                    break
            if not gibbs.get(t).all_finite():
                raise NonFiniteGradientError(t, config.epochs, float("nan"))
            if checkpoint_dir is not None:
                _checkpoint(checkpoint_dir, problem, t, config, gibbs.get(t))
    finally:
        if telemetry:
            telemetry.close()
    return gibbs


def _apply_beta_scaling(config: TrainConfig, n) -> TrainConfig:
    if not config.beta_n_scaling:
        return config
    reg = replace(config.reg, beta=config.reg.beta * n ** 0.25)
    return replace(config, reg=reg)


def config_hash(config: TrainConfig) -> str:
    blob = json.dumps(
        {k: (v.__dict__ if isinstance(v, RegSpec) else v)
         for k, v in config.__dict__.items()},
        sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _checkpoint(checkpoint_dir, problem, t, config, ens) -> None:
    os.makedirs(checkpoint_dir, exist_ok=True)
    nets.save_ensemble(ens, os.path.join(checkpoint_dir, f"stage_{t:03d}.txt"))
    manifest = {
        "problem": problem.name,
        "stage": t,
        "epochs": config.epochs,
        "config_hash": config_hash(config),
    }
    with open(os.path.join(checkpoint_dir, f"stage_{t:03d}.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
