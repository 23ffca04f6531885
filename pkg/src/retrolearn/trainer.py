"""The training loop tying networks, losses, and retrospection together.

A single ``train`` call runs one seeded experiment end to end and returns
a ``TrainReport``. Identical configs and datasets give bitwise-identical
parameter trajectories and reports: all randomness is derived from the
config seed, and nothing consumes entropy conditionally on the method, so
runs that share a seed stay batch-for-batch comparable across methods.
"""
from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import product
from typing import Callable, Sequence

import numpy as np

from .data import BatchPlan, LabeledDataset, epoch_batches
from .losses import cross_entropy, lsr_loss, lwr_loss_parts, max_entropy_loss, softmax_temperature
from .network import MLP
from .optim import adam_step, sgd_momentum_step
from .retrospection import RetroSchedule, SoftLabelStore
from .tensor import Tape

__all__ = [
    "METHODS",
    "normalize_method",
    "TrainConfig",
    "TrainDivergedError",
    "EpochRecord",
    "EvalResult",
    "TrainReport",
    "train",
    "train_many",
    "evaluate",
    "SweepRun",
    "run_sweep",
    "summarize_sweep",
]

METHODS = ("std", "lsr", "max_entropy", "lwr")


def normalize_method(name: str) -> str:
    """Canonical lowercase method name; accepts common spelling variants."""
    canon = str(name).strip().lower().replace("-", "_").replace(" ", "_")
    if canon == "maxentropy":
        canon = "max_entropy"
    if canon not in METHODS:
        raise ValueError(f"unknown method {name!r}; expected one of {METHODS}")
    return canon


class TrainDivergedError(RuntimeError):
    """The loss stopped being finite; carries where and what."""


@dataclass(frozen=True)
class TrainConfig:
    """Everything one training run depends on, seed included."""

    method: str = "std"
    hidden: tuple[int, ...] = (128, 128)
    optimizer: str = "adam"
    lr: float | None = None  # per-optimizer default when None
    momentum: float = 0.9
    weight_decay: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    epochs: int = 50
    batch_size: int = 16
    tau: float = 5.0
    interval: int = 5
    lsr_epsilon: float = 0.1
    entropy_weight: float = 0.1
    fixed_alpha: float | None = None
    seed: int = 0
    eval_every: int = 1

    def __post_init__(self):
        object.__setattr__(self, "method", normalize_method(self.method))
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.optimizer not in ("adam", "sgd_momentum"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.tau <= 0.0:
            raise ValueError(f"temperature must be positive, got {self.tau}")
        if self.interval < 1:
            raise ValueError(f"interval must be >= 1, got {self.interval}")
        if self.eval_every < 1:
            raise ValueError(f"eval_every must be >= 1, got {self.eval_every}")
        if any(h < 1 for h in self.hidden):
            raise ValueError(f"hidden widths must be positive, got {self.hidden}")

    def effective_lr(self) -> float:
        if self.lr is not None:
            return self.lr
        return 1e-3 if self.optimizer == "adam" else 0.01


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    test_acc: float | None
    alpha: float
    beta: float
    committed: bool
    hard_term: float | None = None  # unweighted mean CE part, retrospection runs only
    retro_term: float | None = None  # unweighted mean divergence part, ditto
    step_losses: tuple[float, ...] = field(default=(), repr=False)


@dataclass(frozen=True)
class EvalResult:
    accuracy: float
    predictions: np.ndarray
    confidences: np.ndarray
    correct: np.ndarray
    probabilities: np.ndarray


@dataclass(frozen=True)
class TrainReport:
    config: TrainConfig
    epochs: tuple[EpochRecord, ...]
    last_acc: float | None
    best_acc: float | None
    best_epoch: int | None
    final_eval: EvalResult | None
    wall_time_s: float
    model: MLP = field(default=None, repr=False)


def evaluate(model: MLP, ds: LabeledDataset) -> EvalResult:
    """Full-dataset forward pass at temperature 1.

    Predictions take the argmax (lowest index on ties); confidence is the
    winning class probability.
    """
    probs = softmax_temperature(model.logits(ds.features), 1.0)
    predictions = probs.argmax(axis=1)
    confidences = probs[np.arange(ds.n), predictions]
    correct = predictions == ds.labels
    return EvalResult(
        accuracy=float(correct.mean()),
        predictions=predictions,
        confidences=confidences,
        correct=correct,
        probabilities=probs,
    )


def _step_loss(config: TrainConfig, logits, labels, stored, alpha: float, beta: float):
    """Scalar loss tensor for one batch plus its two parts (values)."""
    if config.method == "lwr" and stored is not None:
        loss, hard, retro = lwr_loss_parts(logits, labels, stored, config.tau, alpha, beta)
        return loss, hard.item(), retro.item()
    if config.method == "lsr":
        return lsr_loss(logits, labels, config.lsr_epsilon), None, None
    if config.method == "max_entropy":
        return max_entropy_loss(logits, labels, config.entropy_weight), None, None
    # std, and retrospection epochs before the first snapshot exists
    loss = cross_entropy(logits, labels)
    if config.method == "lwr":
        return loss, loss.item(), 0.0
    return loss, None, None


def train(
    config: TrainConfig,
    train_ds: LabeledDataset,
    test_ds: LabeledDataset | None = None,
    epoch_callback: Callable[[EpochRecord, MLP, SoftLabelStore | None], None] | None = None,
) -> TrainReport:
    """Run one experiment and report per-epoch metrics.

    ``test_ds`` is evaluated every ``config.eval_every`` epochs and always
    at the last one; pass None to train without held-out tracking. A loss
    that stops being finite aborts with ``TrainDivergedError`` naming the
    epoch and batch.
    """
    if test_ds is not None and test_ds.dim != train_ds.dim:
        raise ValueError(f"test dim {test_ds.dim} does not match train dim {train_ds.dim}")
    started = time.perf_counter()
    init_state, batch_state = np.random.SeedSequence(config.seed).generate_state(2)
    model = MLP(
        [train_ds.dim, *config.hidden, train_ds.num_classes],
        rng=np.random.default_rng(init_state),
    )
    plan = BatchPlan(train_ds.n, config.batch_size, int(batch_state))
    retro = config.method == "lwr"
    store = (
        SoftLabelStore(train_ds.n, train_ds.num_classes, config.tau, config.interval)
        if retro
        else None
    )
    schedule = (
        RetroSchedule(config.epochs, config.interval, config.fixed_alpha) if retro else None
    )
    lr = config.effective_lr()

    records: list[EpochRecord] = []
    for epoch in range(1, config.epochs + 1):
        alpha, beta = schedule.alpha_beta(epoch) if retro else (1.0, 0.0)
        loss_sum = 0.0
        hard_sum = 0.0
        retro_sum = 0.0
        n_correct = 0
        step_losses: list[float] = []
        for step, ids in enumerate(epoch_batches(plan, epoch)):
            x = train_ds.features[ids]
            y = train_ds.labels[ids]
            stored = store.get_soft_labels(ids) if retro else None
            with Tape() as tape:
                logits = model.forward(x)
                loss, hard_part, retro_part = _step_loss(config, logits, y, stored, alpha, beta)
            loss_value = loss.item()
            if not np.isfinite(loss_value):
                raise TrainDivergedError(
                    f"training diverged at epoch {epoch}, batch {step}: "
                    f"loss={loss_value}, hard={hard_part}, retro={retro_part}"
                )
            tape.backward(loss)
            if config.optimizer == "adam":
                adam_step(model.params, lr, config.beta1, config.beta2, config.adam_eps)
            else:
                sgd_momentum_step(model.params, lr, config.momentum, config.weight_decay)
            if retro:
                store.record_pending(ids, logits.values)
                hard_sum += hard_part * ids.size
                retro_sum += retro_part * ids.size
            loss_sum += loss_value * ids.size
            step_losses.append(loss_value)
            n_correct += int((logits.values.argmax(axis=1) == y).sum())
        committed = store.commit_if_due(epoch) if retro else False
        test_acc = None
        if test_ds is not None and (epoch % config.eval_every == 0 or epoch == config.epochs):
            test_acc = evaluate(model, test_ds).accuracy
        record = EpochRecord(
            epoch=epoch,
            train_loss=loss_sum / train_ds.n,
            train_acc=n_correct / train_ds.n,
            test_acc=test_acc,
            alpha=alpha,
            beta=beta,
            committed=committed,
            hard_term=hard_sum / train_ds.n if retro else None,
            retro_term=retro_sum / train_ds.n if retro else None,
            step_losses=tuple(step_losses),
        )
        records.append(record)
        if epoch_callback is not None:
            epoch_callback(record, model, store)

    final_eval = evaluate(model, test_ds) if test_ds is not None else None
    evaluated = [(r.test_acc, r.epoch) for r in records if r.test_acc is not None]
    best_acc, best_epoch = (max(evaluated) if evaluated else (None, None))
    return TrainReport(
        config=config,
        epochs=tuple(records),
        last_acc=evaluated[-1][0] if evaluated else None,
        best_acc=best_acc,
        best_epoch=best_epoch,
        final_eval=final_eval,
        wall_time_s=time.perf_counter() - started,
        model=model,
    )


@dataclass(frozen=True)
class SweepRun:
    tau: float
    interval: int
    seed: int
    report: TrainReport | None
    error: str | None = None


def _fit_one(args) -> tuple[TrainReport | None, str | None]:
    config, train_ds, test_ds = args
    try:
        return train(config, train_ds, test_ds), None
    except Exception as exc:  # keep the batch going; the row records why
        return None, f"{type(exc).__name__}: {exc}"


def train_many(
    tasks: Sequence[tuple[TrainConfig, LabeledDataset, LabeledDataset]],
    jobs: int = 1,
) -> list[tuple[TrainReport | None, str | None]]:
    """Run independent training tasks, optionally on a process pool.

    Each element of the result is ``(report, None)`` on success or
    ``(None, error_string)`` on failure, in task order regardless of
    ``jobs``. Tasks share nothing, so the outcome does not depend on the
    worker count.
    """
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_fit_one, tasks))
    return [_fit_one(t) for t in tasks]


def run_sweep(
    base: TrainConfig,
    train_ds: LabeledDataset,
    test_ds: LabeledDataset,
    taus: Sequence[float],
    intervals: Sequence[int],
    seeds: Sequence[int],
    jobs: int = 1,
) -> list[SweepRun]:
    """Train every (tau, interval, seed) combination of the base config.

    Failed runs are recorded with their error string and do not stop the
    sweep. Results come back in grid order regardless of ``jobs``.
    """
    grid = list(product(taus, intervals, seeds))
    configs = [
        replace(base, tau=tau, interval=interval, seed=seed) for tau, interval, seed in grid
    ]
    outcomes = train_many([(cfg, train_ds, test_ds) for cfg in configs], jobs=jobs)
    return [
        SweepRun(tau=tau, interval=interval, seed=seed, report=report, error=error)
        for (tau, interval, seed), (report, error) in zip(grid, outcomes)
    ]


def summarize_sweep(runs: Sequence[SweepRun]) -> dict[tuple[float, int], dict[str, float]]:
    """Aggregate per (tau, interval) cell: mean and std over seeds.

    Uses population std (ddof=0), so duplicate seeds aggregate to std 0.
    Failed runs are left out of their cell; a cell with no successes is
    omitted entirely.
    """
    cells: dict[tuple[float, int], list[TrainReport]] = {}
    for run in runs:
        if run.report is not None:
            cells.setdefault((run.tau, run.interval), []).append(run.report)
    out: dict[tuple[float, int], dict[str, float]] = {}
    for key, reports in cells.items():
        last = np.array([r.last_acc for r in reports], dtype=np.float64)
        best = np.array([r.best_acc for r in reports], dtype=np.float64)
        out[key] = {
            "n": len(reports),
            "last_mean": float(last.mean()),
            "last_std": float(last.std()),
            "best_mean": float(best.mean()),
            "best_std": float(best.std()),
        }
    return out
