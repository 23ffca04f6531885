"""Classification objectives over logits.

Every loss here is a batch mean, is finite for finite logits (softmax
terms are computed via max-subtracted log-sum-exp), and returns a scalar
tensor differentiable with respect to the logits. Stored soft labels are
always treated as constants: no gradient ever flows into them.
"""
from __future__ import annotations

import numpy as np

from .tensor import (
    ShapeError,
    Tensor,
    add,
    exp,
    gather_rows,
    log_softmax,
    mean,
    mul,
    record_op,
    rowsum,
    scale,
    shift,
)

__all__ = [
    "softmax_temperature",
    "cross_entropy",
    "kl_divergence",
    "lwr_loss",
    "lwr_loss_parts",
    "lsr_loss",
    "max_entropy_loss",
]

# probabilities below this floor are clamped inside logarithms
LOG_FLOOR = 1e-12


def softmax_temperature(logits, tau: float = 1.0):
    """Temperature-softened softmax, ``softmax(logits / tau)`` per row.

    Accepts either a graph tensor (returns a graph tensor, so gradients
    flow) or a plain array (returns a plain array; 1-d input is treated
    as a single distribution). Higher ``tau`` flattens the distribution
    toward uniform; ``tau=1`` is the ordinary softmax.
    """
    if isinstance(logits, Tensor):
        return exp(log_softmax(logits, tau))
    if tau <= 0.0:
        raise ValueError(f"temperature must be positive, got {tau}")
    z = np.asarray(logits, dtype=np.float64) / tau
    if z.ndim == 1:
        z = z - z.max()
        e = np.exp(z)
        return e / e.sum()
    if z.ndim != 2:
        raise ShapeError(f"softmax_temperature expects 1-d or 2-d input, got {z.shape}")
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _check_labels(logits: Tensor, labels) -> np.ndarray:
    idx = np.asarray(labels)
    if idx.ndim != 1 or idx.shape[0] != logits.shape[0]:
        raise ShapeError(f"labels {idx.shape} do not match logits {logits.shape}")
    return idx


def cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean negative log-likelihood of the true classes."""
    idx = _check_labels(logits, labels)
    lp = log_softmax(logits, 1.0)
    return scale(mean(gather_rows(lp, idx)), -1.0)


def _as_prob_array(x, what: str) -> np.ndarray:
    values = x.values if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)
    rows = values[None, :] if values.ndim == 1 else values
    if rows.ndim != 2:
        raise ShapeError(f"{what} must be 1-d or 2-d, got shape {values.shape}")
    if np.any(rows < 0.0):
        raise ValueError(f"{what} has negative entries")
    sums = rows.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > 1e-6):
        worst = float(np.abs(sums - 1.0).max())
        raise ValueError(f"{what} rows must sum to 1 (worst deviation {worst:.3g})")
    return rows


def kl_divergence(p, q) -> Tensor:
    """Mean Kullback-Leibler divergence ``KL(p || q)`` over rows.

    ``sum_c p_c * (log p_c - log q_c)`` with the ``0 * log 0 = 0``
    convention; probabilities are clamped by ``LOG_FLOOR`` inside the
    logarithms so the value stays finite even when ``q`` has zeros where
    ``p`` does not. Either argument may be a graph tensor, in which case
    gradients flow into it; plain arrays stay out of the graph.
    """
    p_rows = _as_prob_array(p, "p")
    q_rows = _as_prob_array(q, "q")
    if p_rows.shape != q_rows.shape:
        raise ShapeError(f"kl_divergence: shapes {p_rows.shape} and {q_rows.shape} differ")
    n_rows = p_rows.shape[0]
    log_p = np.log(np.maximum(p_rows, LOG_FLOOR))
    log_q = np.log(np.maximum(q_rows, LOG_FLOOR))
    terms = np.where(p_rows > 0.0, p_rows * (log_p - log_q), 0.0)
    value = np.asarray(terms.sum(axis=1).mean())

    inputs = [t for t in (p, q) if isinstance(t, Tensor)]

    def backward(g: np.ndarray) -> None:
        if isinstance(p, Tensor) and p.requires_grad:
            dp = np.where(p_rows > 0.0, log_p - log_q + 1.0, 0.0) / n_rows
            p.grad += (g * dp).reshape(p.shape)
        if isinstance(q, Tensor) and q.requires_grad:
            # clamped region of log q is flat, so its gradient is zero
            dq = np.where(q_rows >= LOG_FLOOR, -p_rows / np.maximum(q_rows, LOG_FLOOR), 0.0)
            q.grad += (g * dq / n_rows).reshape(q.shape)

    return record_op(value, inputs, backward)


def lwr_loss_parts(
    logits: Tensor,
    labels,
    stored,
    tau: float,
    alpha: float,
    beta: float,
) -> tuple[Tensor, Tensor, Tensor]:
    """Retrospection loss together with its two components.

    Returns ``(total, hard, retro)`` where

        hard  = cross-entropy against the integer labels
        retro = KL(stored || softmax(logits / tau))
        total = alpha * hard + beta * tau^2 * retro

    ``stored`` holds earlier per-sample predictions and is detached: the
    loss is differentiable in the logits only, and the gradient of the
    retrospection term is ``(softmax(logits/tau) - stored) / (B * tau)``
    per row before weighting. The ``tau^2`` factor keeps that term's
    gradient scale comparable across temperatures. Computed from log
    probabilities directly, so it is safe for extreme logits.
    """
    if alpha < 0.0 or beta < 0.0:
        raise ValueError(f"loss weights must be nonnegative, got alpha={alpha}, beta={beta}")
    idx = _check_labels(logits, labels)
    stored_rows = _as_prob_array(stored, "stored soft labels")
    if stored_rows.shape != logits.shape:
        raise ShapeError(
            f"stored soft labels {stored_rows.shape} do not match logits {logits.shape}"
        )
    hard = cross_entropy(logits, idx)
    lp_t = log_softmax(logits, tau)
    cross = mean(rowsum(mul(lp_t, stored_rows)))
    neg_entropy = float(
        np.mean(
            np.where(stored_rows > 0.0, stored_rows * np.log(np.maximum(stored_rows, LOG_FLOOR)), 0.0).sum(axis=1)
        )
    )
    retro = shift(scale(cross, -1.0), neg_entropy)
    total_loss = add(scale(hard, alpha), scale(retro, beta * tau * tau))
    return total_loss, hard, retro


def lwr_loss(logits: Tensor, labels, stored, tau: float, alpha: float, beta: float) -> Tensor:
    """See ``lwr_loss_parts``; returns just the combined scalar."""
    total_loss, _, _ = lwr_loss_parts(logits, labels, stored, tau, alpha, beta)
    return total_loss


def lsr_loss(logits: Tensor, labels, epsilon: float = 0.1) -> Tensor:
    """Cross-entropy against labels smoothed toward uniform.

    The target puts ``1 - epsilon`` on the true class plus ``epsilon / C``
    spread over all classes, which splits into ``(1 - epsilon)`` times the
    hard cross-entropy plus ``epsilon`` times the cross-entropy against
    the uniform distribution. ``epsilon = 0`` reproduces plain
    cross-entropy exactly.
    """
    if not 0.0 <= epsilon < 1.0:
        raise ValueError(f"epsilon must be in [0, 1), got {epsilon}")
    idx = _check_labels(logits, labels)
    num_classes = logits.shape[1]
    lp = log_softmax(logits, 1.0)
    hard = scale(mean(gather_rows(lp, idx)), -(1.0 - epsilon))
    uniform = scale(mean(rowsum(lp)), -(epsilon / num_classes))
    return add(hard, uniform)


def max_entropy_loss(logits: Tensor, labels, weight: float = 0.1) -> Tensor:
    """Cross-entropy minus a weighted prediction-entropy bonus.

    Encourages less confident output distributions: the penalty term is
    ``-weight * H(softmax(logits))`` per sample, averaged over the batch.
    ``weight = 0`` reproduces plain cross-entropy exactly.
    """
    if weight < 0.0:
        raise ValueError(f"entropy weight must be nonnegative, got {weight}")
    idx = _check_labels(logits, labels)
    lp = log_softmax(logits, 1.0)
    probs = exp(lp)
    hard = scale(mean(gather_rows(lp, idx)), -1.0)
    neg_entropy = mean(rowsum(mul(probs, lp)))
    return add(hard, scale(neg_entropy, weight))
