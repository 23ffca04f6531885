"""Scikit-learn compatible front end for the training procedures."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .data import LabeledDataset, NormStats, zscore_normalize
from .losses import softmax_temperature
from .trainer import TrainConfig, train

__all__ = ["RetroMLPClassifier"]


def _check_features(X, expected_dim: int | None = None) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"X must be 2-d (n_samples, n_features), got shape {X.shape}")
    if X.shape[0] < 1 or X.shape[1] < 1:
        raise ValueError(f"X must be non-empty, got shape {X.shape}")
    if not np.isfinite(X).all():
        raise ValueError("X contains NaN or infinite entries")
    if expected_dim is not None and X.shape[1] != expected_dim:
        raise ValueError(f"X has {X.shape[1]} features, the fitted model expects {expected_dim}")
    return X


class RetroMLPClassifier(ClassifierMixin, BaseEstimator):
    """MLP classifier trained with a selectable objective.

    ``method`` picks the objective: plain cross-entropy (``"std"``),
    label smoothing (``"lsr"``), an entropy bonus (``"max_entropy"``), or
    retrospection of the model's own earlier softened predictions
    (``"lwr"``), where every ``interval`` epochs the current predictions
    are frozen as per-sample soft targets at temperature ``tau``.

    Follows the usual estimator conventions: constructor stores
    hyperparameters untouched, ``fit`` learns ``classes_`` and the
    network, results carry trailing underscores, so ``clone`` and
    cross-validation tooling work.

    >>> clf = RetroMLPClassifier(method="lwr", epochs=20, seed=0)
    >>> clf.fit(X, y).predict(X)  # doctest: +SKIP
    """

    def __init__(
        self,
        method: str = "std",
        hidden: tuple[int, ...] = (128, 128),
        optimizer: str = "adam",
        lr: float | None = None,
        epochs: int = 50,
        batch_size: int = 16,
        tau: float = 5.0,
        interval: int = 5,
        lsr_epsilon: float = 0.1,
        entropy_weight: float = 0.1,
        momentum: float = 0.9,
        weight_decay: float = 0.0,
        normalize: bool = False,
        seed: int = 0,
    ):
        self.method = method
        self.hidden = hidden
        self.optimizer = optimizer
        self.lr = lr
        self.epochs = epochs
        self.batch_size = batch_size
        self.tau = tau
        self.interval = interval
        self.lsr_epsilon = lsr_epsilon
        self.entropy_weight = entropy_weight
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.normalize = normalize
        self.seed = seed

    def fit(self, X, y) -> "RetroMLPClassifier":
        X = _check_features(X)
        y = np.asarray(y)
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise ValueError(f"y {y.shape} does not match X rows {X.shape[0]}")
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        if self.classes_.size < 2:
            raise ValueError("need at least 2 classes in y")
        ds = LabeledDataset(features=X, labels=y_idx, num_classes=self.classes_.size)
        self.norm_stats_: NormStats | None = None
        if self.normalize:
            ds, self.norm_stats_ = zscore_normalize(ds)
        config = TrainConfig(
            method=self.method,
            hidden=tuple(self.hidden),
            optimizer=self.optimizer,
            lr=self.lr,
            momentum=self.momentum,
            weight_decay=self.weight_decay,
            epochs=self.epochs,
            batch_size=self.batch_size,
            tau=self.tau,
            interval=self.interval,
            lsr_epsilon=self.lsr_epsilon,
            entropy_weight=self.entropy_weight,
            seed=self.seed,
        )
        self.report_ = train(config, ds)
        self.model_ = self.report_.model
        self.n_features_in_ = X.shape[1]
        return self

    def predict_proba(self, X) -> np.ndarray:
        X = _check_features(X, self.n_features_in_)
        if self.norm_stats_ is not None:
            X = (X - self.norm_stats_.mean) / np.where(
                self.norm_stats_.std > 0.0, self.norm_stats_.std, 1.0
            )
        return softmax_temperature(self.model_.logits(X), 1.0)

    def predict(self, X) -> np.ndarray:
        return self.classes_[self.predict_proba(X).argmax(axis=1)]
