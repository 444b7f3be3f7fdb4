"""Control-problem environments: contract, samplers, Merton and Zermelo.

A ControlProblem bundles the one-step transition x' = h_t(x, u, z), running
and terminal costs, a reference control, and the sampler generating the
uncontrolled environment paths Z = (Z_1, ..., Z_T) that constitute the
training data.  All callables are batched: states, controls and environment
rows come as 2-D arrays with one row per path.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import expit


@dataclass(frozen=True)
class OUSpec:
    """Ornstein-Uhlenbeck wind: dZ = theta (alpha - Z) dt + vartheta dW.

    Discretised by Euler-Maruyama with timestep tau:
        Z_{t+1} = Z_t + theta (alpha - Z_t) tau + vartheta sqrt(tau) eps.
    """

    theta: float = 1.0
    alpha: float = 0.0
    vartheta: float = 1.0
    tau: float = 0.04
    z0_low: float = -0.5
    z0_high: float = 0.5

    def __post_init__(self):
        if self.theta < 0 or self.vartheta < 0:
            raise ValueError("theta and vartheta must be nonnegative")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.z0_low > self.z0_high:
            raise ValueError("z0 bounds out of order")


@dataclass(frozen=True)
class ControlProblem:
    """Environment contract used by rollout/training.

    transition, costs and reference control operate on batches:
      transition(t, X, U, Znext) -> X' with X (B, state_dim), U (B, control_dim),
      Znext (B, env_dim) the row of the path consumed at step t.
    transition_vjp(t, X, U, Znext, lam) returns (lam . dh/dx, lam . dh/du).
    """

    name: str
    horizon: int
    state_dim: int
    control_dim: int
    env_dim: int
    trainable_steps: tuple
    transition: Callable
    transition_vjp: Callable
    running_cost: Callable            # (t, X, U) -> (B,)
    running_cost_grad: Callable       # (t, X, U) -> (dc/dx (B,dx), dc/du (B,du))
    terminal_cost: Callable           # (X,) -> (B,)
    terminal_cost_grad: Callable      # (X,) -> (B,dx)
    reference_control: Callable       # (t, X) -> (B,du)
    initial_state: Callable           # (Z (B,T,env_dim),) -> (B,dx)
    sampler: "PathSampler"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        bad = [t for t in self.trainable_steps if not 0 <= t < self.horizon]
        if bad:
            raise ValueError(f"trainable steps {bad} outside horizon")


@dataclass(frozen=True)
class PathSampler:
    """Draws i.i.d. environment paths as an array (count, T, env_dim)."""

    horizon: int
    env_dim: int
    draw: Callable                    # (count, rng) -> (count, T, env_dim)

    def sample(self, count, rng) -> np.ndarray:
        if count < 1:
            raise ValueError("count must be >= 1")
        paths = self.draw(count, rng)
        assert paths.shape == (count, self.horizon, self.env_dim)
        return paths


def sample_paths(sampler: PathSampler, count, rng) -> np.ndarray:
    """i.i.d. paths of the stochastic environment; deterministic given rng."""
    return sampler.sample(count, rng)


@dataclass(frozen=True)
class Dataset:
    """Independent train/test path sets drawn from one sampler."""

    train: np.ndarray                 # (n, T, env_dim)
    test: np.ndarray                  # (n_test, T, env_dim)
    seed: int


def make_dataset(problem: ControlProblem, n, n_test, seed) -> Dataset:
    ss = np.random.SeedSequence(seed)
    rng_train, rng_test = (np.random.default_rng(s) for s in ss.spawn(2))
    return Dataset(
        train=sample_paths(problem.sampler, n, rng_train),
        test=sample_paths(problem.sampler, n_test, rng_test),
        seed=seed,
    )


# ---------------------------------------------------------------------------
# Merton portfolio problem (T = 2)
# ---------------------------------------------------------------------------

def merton_problem(d=10, lam=1.0, m_drift=0.18, s_vol=0.44, eta=None,
                   r_rate=0.0, y0=1.0) -> ControlProblem:
    """Two-period exponential-utility portfolio allocation.

    State x = (Y_t, Z_t) of dimension 1 + d, with Z_0 := 0.  Wealth recursion
        Y_{t+1} = (1 + r) Y_t + u . (Z_{t+1} - r 1),
    loss = exp(-lam Y_2) - 1 (the negated utility, minimised).  The t = 0
    control is the fixed uniform allocation y0 * (1/d, ..., 1/d); only t = 1
    is trainable.  Returns Z_1 ~ U[-1, 1]^d and Z_2 = zeta * eta with
    zeta ~ N(m_drift, s_vol^2).
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    if s_vol <= 0:
        raise ValueError("s_vol must be positive")
    if lam <= 0:
        raise ValueError("lam must be positive")
    if eta is None:
        eta = np.ones(d) / np.sqrt(d)
    eta = np.asarray(eta, dtype=float)
    if eta.shape != (d,) or not np.isclose(np.linalg.norm(eta), 1.0):
        raise ValueError("eta must be a unit vector of length d")

    T = 2
    state_dim = 1 + d
    pi0 = np.full(d, y0 / d)

    def transition(t, X, U, Znext):
        Y = (1.0 + r_rate) * X[:, 0] + np.einsum("bd,bd->b", U, Znext - r_rate)
        return np.hstack([Y[:, None], Znext])

    def transition_vjp(t, X, U, Znext, lam_next):
        # new Z block is independent of (x, u); only Y propagates
        gx = np.zeros_like(X)
        gx[:, 0] = (1.0 + r_rate) * lam_next[:, 0]
        gu = lam_next[:, 0:1] * (Znext - r_rate)
        return gx, gu

    def running_cost(t, X, U):
        return np.zeros(X.shape[0])

    def running_cost_grad(t, X, U):
        return np.zeros_like(X), np.zeros_like(U)

    def terminal_cost(X):
        return np.exp(-lam * X[:, 0]) - 1.0

    def terminal_cost_grad(X):
        g = np.zeros_like(X)
        g[:, 0] = -lam * np.exp(-lam * X[:, 0])
        return g

    def reference_control(t, X):
        return np.broadcast_to(pi0, (X.shape[0], d)).copy()

    def initial_state(Z):
        X0 = np.zeros((Z.shape[0], state_dim))
        X0[:, 0] = y0
        return X0

    def draw(count, rng):
        Z = np.empty((count, T, d))
        Z[:, 0, :] = rng.uniform(-1.0, 1.0, size=(count, d))
        zeta = rng.normal(m_drift, s_vol, size=count)
        Z[:, 1, :] = zeta[:, None] * eta
        return Z

    return ControlProblem(
        name="merton",
        horizon=T,
        state_dim=state_dim,
        control_dim=d,
        env_dim=d,
        trainable_steps=(1,),
        transition=transition,
        transition_vjp=transition_vjp,
        running_cost=running_cost,
        running_cost_grad=running_cost_grad,
        terminal_cost=terminal_cost,
        terminal_cost_grad=terminal_cost_grad,
        reference_control=reference_control,
        initial_state=initial_state,
        sampler=PathSampler(T, d, draw),
        params=dict(d=d, lam=lam, m_drift=m_drift, s_vol=s_vol, eta=eta,
                    r_rate=r_rate, y0=y0),
    )


def merton_oracle(problem: ControlProblem, mc_paths, rng):
    """Analytic optimal control and Monte-Carlo value of its expected reward.

    pi* = (m / (lam s^2)) eta; the value is estimated as
    E[1 - exp(-lam Y_2)] under the full sampler (t = 0 leg under the fixed
    uniform allocation), with a standard error.
    """
    if mc_paths < 10**4:
        raise ValueError("mc_paths must be >= 1e4")
    p = problem.params
    pi_star = (p["m_drift"] / (p["lam"] * p["s_vol"] ** 2)) * p["eta"]
    Z = sample_paths(problem.sampler, mc_paths, rng)
    X0 = problem.initial_state(Z)
    U0 = problem.reference_control(0, X0)
    X1 = problem.transition(0, X0, U0, Z[:, 0, :])
    U1 = np.broadcast_to(pi_star, (mc_paths, p["d"]))
    X2 = problem.transition(1, X1, U1, Z[:, 1, :])
    rewards = -problem.terminal_cost(X2)          # reward J = -loss
    v_star_mc = float(rewards.mean())
    se = float(rewards.std(ddof=1) / np.sqrt(mc_paths))
    return pi_star, v_star_mc, se


# ---------------------------------------------------------------------------
# Zermelo navigation problem
# ---------------------------------------------------------------------------

def obstacle_penalty(M, A, sq_norm):
    """Soft unit-circle penalty M * (1 - 1/(1 + exp(A (1 - |x|^2))))."""
    return M * expit(A * (1.0 - sq_norm))


def zermelo_problem(v_s=0.8, target=(20.0, 0.0), M=10.0, A=2.0,
                    ou: OUSpec | None = None, steps=50) -> ControlProblem:
    """Navigate from (-20, x0) to the target against a vertical OU wind.

    State (X, Y, Z_t) with Z_t the current wind.  One-step move
        (X, Y) <- (X, Y) + v_s (sin u, cos u) + (0, Z_{t+1}),
    running cost: soft unit-circle obstacle penalty at every visited state
    (the terminal-state evaluation lives in the terminal cost, together with
    the squared distance to the target).

    Environment rows carry (wind Z_t, x0, Z_0); the start offset
    x0 ~ U[-1, 1] and OU initial value ride along as constant columns so the
    dataset is the sole source of randomness.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if v_s <= 0:
        raise ValueError("v_s must be positive")
    if ou is None:
        ou = OUSpec()
    target = np.asarray(target, dtype=float)
    if target.shape != (2,):
        raise ValueError("target must be a 2-D point")

    T = steps
    state_dim = 3   # (X, Y, current wind)
    env_dim = 3     # (wind, x0, z0)

    def _penalty(X):
        return obstacle_penalty(M, A, X[:, 0] ** 2 + X[:, 1] ** 2)

    def _penalty_grad_xy(X):
        # d/dxy of M * expit(A (1 - |xy|^2)) = -2 M A f (1 - f) * (x, y)
        sq = X[:, 0] ** 2 + X[:, 1] ** 2
        f = expit(A * (1.0 - sq))
        coef = -2.0 * M * A * f * (1.0 - f)
        return coef[:, None] * X[:, :2]

    def transition(t, X, U, Znext):
        u = U[:, 0]
        wind = Znext[:, 0]
        out = np.empty_like(X)
        out[:, 0] = X[:, 0] + v_s * np.sin(u)
        out[:, 1] = X[:, 1] + v_s * np.cos(u) + wind
        out[:, 2] = wind
        return out

    def transition_vjp(t, X, U, Znext, lam_next):
        u = U[:, 0]
        gx = np.zeros_like(X)
        gx[:, 0] = lam_next[:, 0]
        gx[:, 1] = lam_next[:, 1]
        gu = (lam_next[:, 0] * v_s * np.cos(u)
              - lam_next[:, 1] * v_s * np.sin(u))[:, None]
        return gx, gu

    def running_cost(t, X, U):
        return _penalty(X)

    def running_cost_grad(t, X, U):
        gx = np.zeros_like(X)
        gx[:, :2] = _penalty_grad_xy(X)
        return gx, np.zeros_like(U)

    def terminal_cost(X):
        dx = X[:, 0] - target[0]
        dy = X[:, 1] - target[1]
        return dx * dx + dy * dy + _penalty(X)

    def terminal_cost_grad(X):
        g = np.zeros_like(X)
        g[:, 0] = 2.0 * (X[:, 0] - target[0])
        g[:, 1] = 2.0 * (X[:, 1] - target[1])
        g[:, :2] += _penalty_grad_xy(X)
        return g

    def reference_control(t, X):
        # constant heading with velocity (v_s, 0): angle pi/2 under (sin, cos)
        return np.full((X.shape[0], 1), np.pi / 2.0)

    def initial_state(Z):
        X0 = np.empty((Z.shape[0], state_dim))
        X0[:, 0] = -20.0
        X0[:, 1] = Z[:, 0, 1]   # x0 column
        X0[:, 2] = Z[:, 0, 2]   # OU initial value
        return X0

    def draw(count, rng):
        x0 = rng.uniform(-1.0, 1.0, size=count)
        z0 = rng.uniform(ou.z0_low, ou.z0_high, size=count)
        eps = rng.standard_normal((count, T))
        Z = np.empty((count, T, env_dim))
        z = z0.copy()
        for t in range(T):
            z = z + ou.theta * (ou.alpha - z) * ou.tau \
                + ou.vartheta * np.sqrt(ou.tau) * eps[:, t]
            Z[:, t, 0] = z
        Z[:, :, 1] = x0[:, None]
        Z[:, :, 2] = z0[:, None]
        return Z

    return ControlProblem(
        name="zermelo",
        horizon=T,
        state_dim=state_dim,
        control_dim=1,
        env_dim=env_dim,
        trainable_steps=tuple(range(T)),
        transition=transition,
        transition_vjp=transition_vjp,
        running_cost=running_cost,
        running_cost_grad=running_cost_grad,
        terminal_cost=terminal_cost,
        terminal_cost_grad=terminal_cost_grad,
        reference_control=reference_control,
        initial_state=initial_state,
        sampler=PathSampler(T, env_dim, draw),
        params=dict(v_s=v_s, target=target, M=M, A=A, ou=ou, steps=steps),
    )


# ---------------------------------------------------------------------------
# zero-cost problem (Gibbs stationarity sanity checks)
# ---------------------------------------------------------------------------

def zero_cost_problem(state_dim=1, control_dim=1, horizon=1) -> ControlProblem:
    """All costs identically zero and an identity transition.

    With zero cost the noisy-SGD update reduces to Langevin dynamics on the
    regularisation potential alone, whose stationary law is the Gibbs
    reference measure; used as an analytic sanity check of the trainer.
    """

    def transition(t, X, U, Znext):
        return X

    def transition_vjp(t, X, U, Znext, lam_next):
        return lam_next, np.zeros((X.shape[0], control_dim))

    def zero_cost(t, X, U):
        return np.zeros(X.shape[0])

    def zero_cost_grad(t, X, U):
        return np.zeros_like(X), np.zeros_like(U)

    return ControlProblem(
        name="zero_cost",
        horizon=horizon,
        state_dim=state_dim,
        control_dim=control_dim,
        env_dim=1,
        trainable_steps=tuple(range(horizon)),
        transition=transition,
        transition_vjp=transition_vjp,
        running_cost=zero_cost,
        running_cost_grad=zero_cost_grad,
        terminal_cost=lambda X: np.zeros(X.shape[0]),
        terminal_cost_grad=lambda X: np.zeros_like(X),
        reference_control=lambda t, X: np.zeros((X.shape[0], control_dim)),
        initial_state=lambda Z: np.zeros((Z.shape[0], state_dim)),
        sampler=PathSampler(horizon, 1,
                            lambda count, rng: np.zeros((count, horizon, 1))),
    )


# ---------------------------------------------------------------------------
# dataset serialisation
# ---------------------------------------------------------------------------

def save_paths_csv(paths: np.ndarray, path) -> None:
    """CSV with columns (path_id, t, z0, z1, ...).

    For Zermelo, z1 is the start-offset x0 column and z2 the OU initial value.
    """
    count, T, dz = paths.shape
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["path_id", "t"] + [f"z{k}" for k in range(dz)])
        for i in range(count):
            for t in range(T):
                writer.writerow([i, t + 1] + [f"{v:.17g}" for v in paths[i, t]])


def load_paths_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:2] != ["path_id", "t"]:
            raise ValueError(f"{path}: unexpected header {header!r}")
        dz = len(header) - 2
        rows = [(int(r[0]), int(r[1]), [float(v) for v in r[2:]]) for r in reader]
    count = max(r[0] for r in rows) + 1
    T = max(r[1] for r in rows)
    out = np.empty((count, T, dz))
    for i, t, vals in rows:
        out[i, t - 1] = vals
    return out
