"""Periodic snapshots of a model's own softened predictions.

During training, every batch's softened outputs are parked in a pending
buffer keyed by sample id. At the end of every ``interval``-th epoch the
pending buffer is promoted to the active buffer in one swap. Reads always
come from the active buffer, which is bitwise constant between commits,
so the targets a batch trains against never move mid-interval.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

from .losses import softmax_temperature
from .tensor import ShapeError, Tensor

__all__ = ["IncompleteEpochError", "SoftLabelStore", "RetroSchedule"]

logger = logging.getLogger(__name__)

# fraction of the loss handed to the retrospection term by the final commit
_RAMP = 0.9


class IncompleteEpochError(RuntimeError):
    """A commit was attempted before every sample was recorded this epoch."""


class SoftLabelStore:
    """Double-buffered per-sample soft labels.

    Holds two ``(num_samples, num_classes)`` float64 buffers. Recording
    writes softened probabilities into the pending buffer; committing
    swaps pending into active. ``pending_mask`` tracks which sample ids
    have been recorded in the current epoch and is reset at every epoch
    boundary, whether or not a commit happened.
    """

    def __init__(self, num_samples: int, num_classes: int, tau: float, interval: int):
        if num_samples < 1 or num_classes < 2:
            raise ValueError(
                f"need at least 1 sample and 2 classes, got {num_samples}, {num_classes}"
            )
        if tau <= 0.0:
            raise ValueError(f"temperature must be positive, got {tau}")
        if interval < 1:
            raise ValueError(f"commit interval must be >= 1, got {interval}")
        self.num_samples = int(num_samples)
        self.num_classes = int(num_classes)
        self.tau = float(tau)
        self.interval = int(interval)
        self.active: np.ndarray | None = None
        self.pending = np.zeros((self.num_samples, self.num_classes))
        self.pending_mask = np.zeros(self.num_samples, dtype=bool)
        self.snapshot_index = 0

    def record_pending(self, ids, logits) -> None:
        """Soften a batch of logits and park them under their sample ids.

        ``logits`` may be a graph tensor; only its values are read, so
        nothing recorded here ever links back into the autodiff graph.
        Recording the same id twice in one epoch keeps the last write and
        logs the duplicate.
        """
        idx = np.asarray(ids)
        if idx.ndim != 1:
            raise ShapeError(f"ids must be 1-d, got shape {idx.shape}")
        if not np.issubdtype(idx.dtype, np.integer):
            raise ShapeError("ids must be integers")
        if idx.min(initial=0) < 0 or idx.max(initial=-1) >= self.num_samples:
            raise ValueError(f"sample id out of range for store of {self.num_samples}")
        values = logits.values if isinstance(logits, Tensor) else np.asarray(logits, dtype=np.float64)
        if values.shape != (idx.shape[0], self.num_classes):
            raise ShapeError(
                f"logits {values.shape} do not match ids {idx.shape} x {self.num_classes} classes"
            )
        dup = self.pending_mask[idx]
        if dup.any():
            logger.warning(
                "soft-label store: %d sample id(s) recorded twice this epoch; keeping last",
                int(dup.sum()),
            )
        self.pending[idx] = softmax_temperature(values, self.tau)
        self.pending_mask[idx] = True

    def commit_if_due(self, epoch: int) -> bool:
        """Close out ``epoch`` (1-indexed), swapping buffers when it is due.

        Must be called exactly once at the end of each epoch. On commit
        epochs (multiples of ``interval``) the pending buffer becomes the
        active one; a commit with unrecorded samples raises
        ``IncompleteEpochError``. The pending mask resets either way.
        """
        if epoch < 1:
            raise ValueError(f"epoch must be >= 1, got {epoch}")
        due = epoch % self.interval == 0
        if due:
            if not self.pending_mask.all():
                missing = int((~self.pending_mask).sum())
                raise IncompleteEpochError(
                    f"commit at epoch {epoch}: {missing} of {self.num_samples} samples "
                    "were never recorded this epoch"
                )
            previous = self.active
            self.active = self.pending
            # recycle the old buffer; its contents are overwritten before any read
            self.pending = previous if previous is not None else np.zeros_like(self.active)
            self.snapshot_index += 1
        self.pending_mask[:] = False
        return due

    def get_soft_labels(self, ids) -> np.ndarray | None:
        """Active soft labels for the given sample ids; None before any commit."""
        if self.active is None:
            return None
        idx = np.asarray(ids)
        if idx.min(initial=0) < 0 or idx.max(initial=-1) >= self.num_samples:
            raise ValueError(f"sample id out of range for store of {self.num_samples}")
        return self.active[idx]

    def dump_csv(self, path) -> None:
        """Write the active buffer as ``sample_id,p_0,...,p_{C-1}`` rows."""
        if self.active is None:
            raise ValueError("no committed soft labels to dump")
        header = ["sample_id"] + [f"p_{c}" for c in range(self.num_classes)]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for i in range(self.num_samples):
                writer.writerow([i] + [repr(float(v)) for v in self.active[i]])


@dataclass(frozen=True)
class RetroSchedule:
    """Per-epoch weighting between the hard-label and retrospection terms.

    With commits every ``interval`` epochs out of ``total_epochs``, the
    weights during an epoch follow the most recent commit index ``i``:

        beta  = 0.9 * (i * interval) / total_epochs
        alpha = 1 - beta

    Before the first commit the weights are exactly ``(1, 0)``; by a
    final commit at ``i * interval == total_epochs`` they reach
    ``(0.1, 0.9)``. ``fixed_alpha`` freezes the split at a constant from
    the first commit onward (beta is its complement); epochs before the
    first commit stay at ``(1, 0)`` since there is nothing to retrospect.
    """

    total_epochs: int
    interval: int
    fixed_alpha: float | None = None

    def __post_init__(self):
        if self.total_epochs < 1:
            raise ValueError(f"total_epochs must be >= 1, got {self.total_epochs}")
        if self.interval < 1:
            raise ValueError(f"interval must be >= 1, got {self.interval}")
        if self.fixed_alpha is not None and not 0.0 <= self.fixed_alpha <= 1.0:
            raise ValueError(f"fixed_alpha must be in [0, 1], got {self.fixed_alpha}")

    def num_commits(self) -> int:
        return self.total_epochs // self.interval

    def weights_at_snapshot(self, index: int) -> tuple[float, float]:
        """Weights in force once snapshot ``index`` is the latest commit."""
        if index < 0 or index > self.num_commits():
            raise ValueError(f"snapshot index {index} outside 0..{self.num_commits()}")
        if index == 0:
            return 1.0, 0.0
        if self.fixed_alpha is not None:
            return self.fixed_alpha, 1.0 - self.fixed_alpha
        beta = _RAMP * (index * self.interval) / self.total_epochs
        return 1.0 - beta, beta

    def alpha_beta(self, epoch: int) -> tuple[float, float]:
        """Weights for a 1-indexed training epoch."""
        if not 1 <= epoch <= self.total_epochs:
            raise ValueError(f"epoch {epoch} outside 1..{self.total_epochs}")
        return self.weights_at_snapshot((epoch - 1) // self.interval)
