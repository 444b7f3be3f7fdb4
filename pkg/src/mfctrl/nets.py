"""Mean-field one-hidden-layer networks over particle ensembles.

A control is parametrised by the empirical measure of r particles
theta_j = (a_j, w_j, b_j):

    u(x) = (1/r) * sum_j a_j * act(w_j . x + b_j)

so duplicating particles leaves the control unchanged and the output is
linear in the output weights a_j.  Forward/backward routines come in a
single-state form (1-D x) and a batched form (rows of X) used by the
trajectory rollout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DimensionMismatchError(ValueError):
    """Input dimensions do not match the ensemble."""


def _tanh(z):
    return np.tanh(z)


def _tanh_deriv(z):
    t = np.tanh(z)
    return 1.0 - t * t


def _relu(z):
    return np.maximum(z, 0.0)


def _relu_deriv(z):
    # subgradient at 0 fixed to 0
    return (z > 0.0).astype(z.dtype)


ACTIVATIONS = {
    "tanh": (_tanh, _tanh_deriv),
    "relu": (_relu, _relu_deriv),
}


@dataclass
class ParticleEnsemble:
    """r particles (a_j, w_j, b_j) with a shared activation.

    a : (r, control_dim) output weights
    w : (r, state_dim) input weights
    b : (r,) biases
    """

    a: np.ndarray
    w: np.ndarray
    b: np.ndarray
    activation: str = "tanh"

    def __post_init__(self):
        self.a = np.atleast_2d(np.asarray(self.a, dtype=float))
        self.w = np.atleast_2d(np.asarray(self.w, dtype=float))
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        r = self.a.shape[0]
        if self.w.shape[0] != r or self.b.shape[0] != r:
            raise DimensionMismatchError(
                f"particle counts disagree: a has {r}, w has {self.w.shape[0]}, "
                f"b has {self.b.shape[0]}"
            )

    @property
    def r(self) -> int:
        return self.a.shape[0]

    @property
    def state_dim(self) -> int:
        return self.w.shape[1]

    @property
    def control_dim(self) -> int:
        return self.a.shape[1]

    def copy(self) -> "ParticleEnsemble":
        return ParticleEnsemble(self.a.copy(), self.w.copy(), self.b.copy(), self.activation)

    def theta(self) -> np.ndarray:
        """Particles as rows (a_j, w_j, b_j), shape (r, control_dim+state_dim+1)."""
        return np.hstack([self.a, self.w, self.b[:, None]])

    def set_theta(self, theta: np.ndarray) -> None:
        c, d = self.control_dim, self.state_dim
        if theta.shape != (self.r, c + d + 1):
            raise DimensionMismatchError("theta table has wrong shape")
        self.a = theta[:, :c].copy()
        self.w = theta[:, c:c + d].copy()
        self.b = theta[:, c + d].copy()

    def all_finite(self) -> bool:
        return (
            np.isfinite(self.a).all()
            and np.isfinite(self.w).all()
            and np.isfinite(self.b).all()
        )


def init_ensemble(r, state_dim, control_dim, rng, activation="tanh",
                  a_scale=0.0, w_scale=1.0, b_scale=1.0) -> ParticleEnsemble:
    """Fresh ensemble: a_j = 0 by default, w_j, b_j i.i.d. normal.

    A zero output layer makes the initial control identically zero.
    """
    a = a_scale * rng.standard_normal((r, control_dim))
    w = w_scale * rng.standard_normal((r, state_dim))
    b = b_scale * rng.standard_normal(r)
    return ParticleEnsemble(a, w, b, activation)


def constant_control_ensemble(value, state_dim, activation="tanh") -> ParticleEnsemble:
    """Single-particle ensemble whose output is a constant control.

    Uses w = 0 so act(w.x + b) = act(b) for every x; for tanh we pick b = 1
    and rescale the output weight.
    """
    value = np.atleast_1d(np.asarray(value, dtype=float))
    if activation != "tanh":
        raise ValueError("constant control injection implemented for tanh only")
    b = 1.0
    a = value / np.tanh(b)
    return ParticleEnsemble(a[None, :], np.zeros((1, state_dim)), np.array([b]), activation)


# ---------------------------------------------------------------------------
# forward / backward
# ---------------------------------------------------------------------------

def _check_state(ens: ParticleEnsemble, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (ens.state_dim,):
        raise DimensionMismatchError(
            f"state has shape {x.shape}, expected ({ens.state_dim},)")
    return x


def forward(ens: ParticleEnsemble, x) -> np.ndarray:
    """u(x) = (1/r) sum_j a_j act(w_j.x + b_j)."""
    x = _check_state(ens, x)
    act, _ = ACTIVATIONS[ens.activation]
    z = ens.w @ x + ens.b
    return act(z) @ ens.a / ens.r


def forward_with_tape(ens: ParticleEnsemble, x):
    """Forward pass returning (control, pre-activations z_j)."""
    x = _check_state(ens, x)
    act, _ = ACTIVATIONS[ens.activation]
    z = ens.w @ x + ens.b
    return act(z) @ ens.a / ens.r, z


def backward_params(ens: ParticleEnsemble, x, z, g_u):
    """Per-particle gradients of L given g_u = dL/du at x.

    Returns (dA, dW, dB) with shapes matching (a, w, b):
        dL/da_j = (1/r) g_u act(z_j)
        dL/dw_j = (1/r) (g_u . a_j) act'(z_j) x
        dL/db_j = (1/r) (g_u . a_j) act'(z_j)
    """
    x = _check_state(ens, x)
    z = np.asarray(z, dtype=float)
    if z.shape != (ens.r,):
        raise DimensionMismatchError("tape does not match ensemble width")
    g_u = np.asarray(g_u, dtype=float)
    if g_u.shape != (ens.control_dim,):
        raise DimensionMismatchError("upstream gradient has wrong control dimension")
    act, dact = ACTIVATIONS[ens.activation]
    da = np.outer(act(z), g_u) / ens.r
    s = (ens.a @ g_u) * dact(z) / ens.r          # (r,)
    dw = np.outer(s, x)
    db = s
    return da, dw, db


def backward_state(ens: ParticleEnsemble, x, z, g_u):
    """d(g_u . u(x))/dx = sum_j (1/r)(g_u . a_j) act'(z_j) w_j."""
    _check_state(ens, x)
    z = np.asarray(z, dtype=float)
    if z.shape != (ens.r,):
        raise DimensionMismatchError("tape does not match ensemble width")
    g_u = np.asarray(g_u, dtype=float)
    _, dact = ACTIVATIONS[ens.activation]
    s = (ens.a @ g_u) * dact(z) / ens.r
    return s @ ens.w


# ---------------------------------------------------------------------------
# batched variants (rows of X), used by the rollout
# ---------------------------------------------------------------------------

def forward_batch(ens: ParticleEnsemble, X):
    """Controls for each row of X: returns (U (B, c), Z (B, r) pre-activations)."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != ens.state_dim:
        raise DimensionMismatchError("batch states have wrong shape")
    act, _ = ACTIVATIONS[ens.activation]
    Z = X @ ens.w.T + ens.b
    return act(Z) @ ens.a / ens.r, Z


def backward_params_batch(ens: ParticleEnsemble, X, Z, G_u):
    """Sum over the batch of per-particle gradients (not averaged)."""
    act, dact = ACTIVATIONS[ens.activation]
    da = act(Z).T @ G_u / ens.r                    # (r, c)
    S = (G_u @ ens.a.T) * dact(Z) / ens.r          # (B, r)
    dw = S.T @ X                                   # (r, d)
    db = S.sum(axis=0)
    return da, dw, db


def backward_state_batch(ens: ParticleEnsemble, Z, G_u):
    """Row-wise d(g_u . u(x))/dx for every batch element, shape (B, d)."""
    _, dact = ACTIVATIONS[ens.activation]
    S = (G_u @ ens.a.T) * dact(Z) / ens.r
    return S @ ens.w


# ---------------------------------------------------------------------------
# serialisation: versioned text table, one particle per row
# ---------------------------------------------------------------------------

FORMAT_VERSION = 1


def save_ensemble(ens: ParticleEnsemble, path) -> None:
    """Text table, columns [a(0..c-1), w(0..d-1), b], with a versioned header."""
    header = (
        f"mfctrl-ensemble v{FORMAT_VERSION} "
        f"r={ens.r} state_dim={ens.state_dim} control_dim={ens.control_dim} "
        f"activation={ens.activation}"
    )
    np.savetxt(path, ens.theta(), header=header, fmt="%.17g")


def load_ensemble(path) -> ParticleEnsemble:
    with open(path) as fh:
        header = fh.readline().lstrip("# ").strip()
    fields = header.split()
    if not fields or fields[0] != "mfctrl-ensemble":
        raise ValueError(f"{path}: not an ensemble file")
    if fields[1] != f"v{FORMAT_VERSION}":
        raise ValueError(f"{path}: unsupported format version {fields[1]}")
    meta = dict(kv.split("=") for kv in fields[2:])
    r, d, c = int(meta["r"]), int(meta["state_dim"]), int(meta["control_dim"])
    theta = np.loadtxt(path, ndmin=2)
    if theta.shape != (r, c + d + 1):
        raise ValueError(f"{path}: table shape {theta.shape} disagrees with header")
    return ParticleEnsemble(theta[:, :c], theta[:, c:c + d], theta[:, c + d],
                            meta["activation"])
