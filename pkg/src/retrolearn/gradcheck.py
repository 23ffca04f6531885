"""Central finite-difference verification of analytic gradients."""
from __future__ import annotations

from typing import Callable

from .network import ParameterSet
from .tensor import ShapeError, Tape, Tensor

__all__ = ["finite_difference_check"]


def finite_difference_check(
    f: Callable[[ParameterSet], Tensor],
    params: ParameterSet,
    h: float = 1e-5,
) -> float:
    """Compare analytic gradients of ``f`` against central differences.

    ``f`` must map the parameter set to a scalar tensor. Every parameter
    coordinate is perturbed by ``+h`` and ``-h`` in turn; the numeric
    slope ``(f(x+h) - f(x-h)) / 2h`` is compared to the tape gradient.
    Returns the worst relative error over all coordinates, falling back
    to absolute error when both slopes are near zero.
    """
    if h <= 0.0:
        raise ValueError(f"step size must be positive, got {h}")
    with Tape() as tape:
        loss = f(params)
    if loss.shape != ():
        raise ShapeError(f"f must return a scalar, got shape {loss.shape}")
    tape.backward(loss)
    analytic = {name: p.grad.copy() for name, p in params.items()}

    worst = 0.0
    for name, p in params.items():
        flat = p.values.reshape(-1)
        grad_flat = analytic[name].reshape(-1)
        for j in range(flat.size):
            saved = flat[j]
            flat[j] = saved + h
            f_plus = f(params).item()
            flat[j] = saved - h
            f_minus = f(params).item()
            flat[j] = saved
            numeric = (f_plus - f_minus) / (2.0 * h)
            a = grad_flat[j]
            scale = max(abs(a), abs(numeric))
            # both slopes tiny: relative error is meaningless, use absolute
            err = abs(a - numeric) if scale < 1e-6 else abs(a - numeric) / scale
            worst = max(worst, err)
    return worst
