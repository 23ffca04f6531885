"""Optimizer steps over a ParameterSet.

Both steps are deterministic functions of (parameter values, gradients,
slot state): repeating a step from identical inputs produces bitwise
identical parameters. Updates happen in place and the same set is
returned for call chaining.
"""
from __future__ import annotations

import numpy as np

from .network import ParameterSet

__all__ = ["MissingGradientError", "sgd_momentum_step", "adam_step"]


class MissingGradientError(RuntimeError):
    """An optimizer step ran before gradients were populated."""


def _gradient(params: ParameterSet, name: str) -> np.ndarray:
    grad = params[name].grad
    if grad is None:
        raise MissingGradientError(f"parameter {name!r} has no gradient; run backward first")
    return grad


def sgd_momentum_step(
    params: ParameterSet,
    lr: float,
    momentum: float = 0.9,
    weight_decay: float = 0.0,
) -> ParameterSet:
    """Classical momentum update.

    buf <- momentum * buf + (grad + weight_decay * param)
    param <- param - lr * buf
    """
    if lr <= 0.0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    if not 0.0 <= momentum < 1.0:
        raise ValueError(f"momentum must be in [0, 1), got {momentum}")
    if weight_decay < 0.0:
        raise ValueError(f"weight decay must be nonnegative, got {weight_decay}")
    for name, p in params.items():
        grad = _gradient(params, name)
        slot = params.slots.setdefault(name, {"momentum": np.zeros_like(p.values)})
        buf = slot["momentum"]
        buf *= momentum
        buf += grad + weight_decay * p.values
        p.values -= lr * buf
    params.step_count += 1
    return params


def adam_step(
    params: ParameterSet,
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> ParameterSet:
    """Adam with bias-corrected first and second moment estimates."""
    if lr <= 0.0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    if not 0.0 <= beta1 < 1.0 or not 0.0 <= beta2 < 1.0:
        raise ValueError(f"betas must be in [0, 1), got {beta1}, {beta2}")
    if eps <= 0.0:
        raise ValueError(f"eps must be positive, got {eps}")
    t = params.step_count + 1
    for name, p in params.items():
        grad = _gradient(params, name)
        slot = params.slots.setdefault(
            name, {"m": np.zeros_like(p.values), "v": np.zeros_like(p.values)}
        )
        slot["m"] = beta1 * slot["m"] + (1.0 - beta1) * grad
        slot["v"] = beta2 * slot["v"] + (1.0 - beta2) * grad * grad
        m_hat = slot["m"] / (1.0 - beta1**t)
        v_hat = slot["v"] / (1.0 - beta2**t)
        p.values -= lr * m_hat / (np.sqrt(v_hat) + eps)
    params.step_count += 1
    return params
