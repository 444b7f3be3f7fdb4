import numpy as np
import pytest


def rel_err(analytic, numeric, floor=1.0):
    """Worst per-coordinate |a - n| / max(floor, |n|).

    The floor keeps finite-difference roundoff on near-zero coordinates from
    registering as spurious relative error; gradients of interest are O(1)
    or larger.
    """
    analytic = np.asarray(analytic, dtype=float)
    numeric = np.asarray(numeric, dtype=float)
    return float(np.max(np.abs(analytic - numeric)
                        / np.maximum(floor, np.abs(numeric))))


def central_diff(f, x, h=1e-5):
    """Central finite differences of scalar f over every coordinate of x."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        xp = x.copy()
        xp[idx] += h
        xm = x.copy()
        xm[idx] -= h
        g[idx] = (f(xp) - f(xm)) / (2.0 * h)
    return g


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
