"""Trajectory rollout, empirical cost-to-go, and the reverse (adjoint) pass.

The cost-to-go from (t, x) along one environment path is

    Qhat_t(x) = sum_{s=t}^{T-1} c_s(X_s, u_s(X_s)) + Phi(X_T),

with the terminal cost folded into the last step's adjusted running cost.
Gradients of the batch risk with respect to the time-t particles are
computed by reverse accumulation: the adjoint lam_s = dQhat/dX_s runs
backwards through the transitions, the frozen future ensembles propagate
state sensitivity (their parameters receive no gradient), and the time-t
particle gradients are assembled from the upstream control gradient
g_u = d_u c_t + (d_u h_t)^T lam_{t+1}.

Reference controls at non-trainable steps are treated as constants in x
(both shipped problems use constant reference controls).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nets
from .envs import ControlProblem


class MissingEnsembleError(ValueError):
    """A trainable step in the rollout range has no ensemble."""


@dataclass
class GibbsVector:
    """Sequence of particle ensembles, one per timestep t = 0..T-1.

    Missing entries fall back to the problem's reference control.
    """

    horizon: int
    ensembles: dict = field(default_factory=dict)

    def get(self, t):
        return self.ensembles.get(t)

    def set(self, t, ensemble) -> None:
        if not 0 <= t < self.horizon:
            raise ValueError(f"timestep {t} outside horizon {self.horizon}")
        self.ensembles[t] = ensemble

    def copy(self) -> "GibbsVector":
        return GibbsVector(self.horizon,
                           {t: e.copy() for t, e in self.ensembles.items()})


@dataclass
class RolloutTape:
    """Forward record from time t0: states, controls, pre-activations."""

    t0: int
    states: list          # length T - t0 + 1, each (B, state_dim)
    controls: list        # length T - t0, each (B, control_dim)
    preactivations: dict  # step -> (B, r) for ensemble-controlled steps


def reference_states(problem: ControlProblem, paths, t) -> np.ndarray:
    """Batched states reached at time t under the reference control."""
    paths = np.asarray(paths, dtype=float)
    X = problem.initial_state(paths)
    for s in range(t):
        U = problem.reference_control(s, X)
        X = problem.transition(s, X, U, paths[:, s, :])
    return X


def reference_state(problem: ControlProblem, path, t) -> np.ndarray:
    """Single-path reference_states."""
    return reference_states(problem, np.asarray(path)[None, :, :], t)[0]


def _forward(problem, gibbs, paths, t, X):
    """Roll forward from (t, X) along every path; returns (Qhat (B,), tape)."""
    T = problem.horizon
    states = [X]
    controls = []
    preacts = {}
    total = np.zeros(X.shape[0])
    for s in range(t, T):
        ens = gibbs.get(s)
        if ens is None and s in problem.trainable_steps:
            raise MissingEnsembleError(f"no ensemble for trainable step {s}")
        if ens is not None:
            U, Z = nets.forward_batch(ens, X)
            preacts[s] = Z
        else:
            U = problem.reference_control(s, X)
        total += problem.running_cost(s, X, U)
        X = problem.transition(s, X, U, paths[:, s, :])
        states.append(X)
        controls.append(U)
    total += problem.terminal_cost(X)
    return total, RolloutTape(t, states, controls, preacts)


def q_hat(problem: ControlProblem, gibbs: GibbsVector, path, t, x):
    """Cost-to-go from (t, x) along one path, with its rollout tape."""
    path = np.asarray(path, dtype=float)[None, :, :]
    x = np.asarray(x, dtype=float)[None, :]
    values, tape = _forward(problem, gibbs, path, t, x)
    return float(values[0]), tape


def batch_risk(problem: ControlProblem, gibbs: GibbsVector, paths, t) -> float:
    """Mean cost-to-go over paths, started from the reference state at t."""
    paths = np.asarray(paths, dtype=float)
    if paths.shape[0] == 0:
        raise ValueError("paths must be nonempty")
    X = reference_states(problem, paths, t)
    values, _ = _forward(problem, gibbs, paths, t, X)
    return float(values.mean())


def risk_and_grad(problem: ControlProblem, gibbs: GibbsVector, paths, t):
    """Batch risk and gradients of (r * batch_risk) w.r.t. time-t particles.

    Returns (risk, (da, dw, db)) with gradient shapes matching the time-t
    ensemble's parameter arrays.
    """
    paths = np.asarray(paths, dtype=float)
    if paths.shape[0] == 0:
        raise ValueError("paths must be nonempty")
    if t not in problem.trainable_steps:
        raise ValueError(f"step {t} is not trainable")
    ens_t = gibbs.get(t)
    if ens_t is None:
        raise MissingEnsembleError(f"no ensemble at step {t}")

    B = paths.shape[0]
    T = problem.horizon
    X0 = reference_states(problem, paths, t)
    values, tape = _forward(problem, gibbs, paths, t, X0)

    lam = problem.terminal_cost_grad(tape.states[-1])
    grads = None
    for s in range(T - 1, t - 1, -1):
        Xs = tape.states[s - t]
        Us = tape.controls[s - t]
        gx_h, gu_h = problem.transition_vjp(s, Xs, Us, paths[:, s, :], lam)
        cx, cu = problem.running_cost_grad(s, Xs, Us)
        G_u = cu + gu_h
        if s == t:
            da, dw, db = nets.backward_params_batch(ens_t, Xs, tape.preactivations[s], G_u)
            # gradient of r * mean-over-paths risk
            scale = ens_t.r / B
            grads = (da * scale, dw * scale, db * scale)
            break
        lam = cx + gx_h
        if s in tape.preactivations:
            lam = lam + nets.backward_state_batch(gibbs.get(s), tape.preactivations[s], G_u)
    return float(values.mean()), grads


def grad_time_t(problem: ControlProblem, gibbs: GibbsVector, paths, t):
    """Per-particle gradients of r * batch_risk at time t: (da, dw, db)."""
    _, grads = risk_and_grad(problem, gibbs, paths, t)
    return grads


def simulate(problem: ControlProblem, gibbs: GibbsVector, paths):
    """Full trajectories from the initial state under the (partially) trained
    control; returns (states (B, T+1, dx), controls (B, T, du), losses (B,))."""
    paths = np.asarray(paths, dtype=float)
    X = problem.initial_state(paths)
    values, tape = _forward(problem, gibbs, paths, 0, X)
    states = np.stack(tape.states, axis=1)
    controls = np.stack(tape.controls, axis=1)
    return states, controls, values


def dump_trajectories(problem: ControlProblem, gibbs: GibbsVector, paths, out_path):
    """CSV dump (path_id, t, state components..., control components...).

    The terminal row (t = T) has empty control fields.
    """
    states, controls, _ = simulate(problem, gibbs, paths)
    B, Tp1, dx = states.shape
    du = controls.shape[2]
    header = (["path_id", "t"]
              + [f"x{k}" for k in range(dx)]
              + [f"u{k}" for k in range(du)])
    with open(out_path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(B):
            for t in range(Tp1):
                cells = [str(i), str(t)]
                cells += [f"{v:.17g}" for v in states[i, t]]
                if t < Tp1 - 1:
                    cells += [f"{v:.17g}" for v in controls[i, t]]
                else:
                    cells += [""] * du
                fh.write(",".join(cells) + "\n")
