"""Entropy-regularised data-driven stochastic control with mean-field
one-hidden-layer particle networks."""

from . import config, envs, evaluation, nets, rollout, training  # noqa: F401

__version__ = "0.1.0"
