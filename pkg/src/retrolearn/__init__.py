"""Self-distillation training with periodic retrospection snapshots.

The package trains MLP classifiers under four objectives: plain
cross-entropy, label smoothing, an entropy bonus, and retrospection,
where the model's own temperature-softened predictions are frozen every
few epochs and used as per-sample soft targets. Calibration metrics and
a label-noise harness round out the toolbox; the ``retrolearn`` command
drives it all from config files.
"""

__version__ = "0.1.0"

from .data import (
    BatchPlan,
    LabeledDataset,
    corrupt_labels,
    epoch_batches,
    gaussian_blobs,
    load_csv,
    train_test_split,
    zscore_normalize,
)
from .estimator import RetroMLPClassifier
from .gradcheck import finite_difference_check
from .losses import (
    cross_entropy,
    kl_divergence,
    lsr_loss,
    lwr_loss,
    max_entropy_loss,
    softmax_temperature,
)
from .metrics import EceReport, compute_ece, reliability_export
from .network import MLP, ParameterSet
from .optim import adam_step, sgd_momentum_step
from .retrospection import RetroSchedule, SoftLabelStore
from .tensor import Tape, Tensor
from .trainer import (
    TrainConfig,
    TrainReport,
    evaluate,
    run_sweep,
    summarize_sweep,
    train,
)

__all__ = [
    "__version__",
    "BatchPlan",
    "LabeledDataset",
    "corrupt_labels",
    "epoch_batches",
    "gaussian_blobs",
    "load_csv",
    "train_test_split",
    "zscore_normalize",
    "RetroMLPClassifier",
    "finite_difference_check",
    "cross_entropy",
    "kl_divergence",
    "lsr_loss",
    "lwr_loss",
    "max_entropy_loss",
    "softmax_temperature",
    "EceReport",
    "compute_ece",
    "reliability_export",
    "MLP",
    "ParameterSet",
    "adam_step",
    "sgd_momentum_step",
    "RetroSchedule",
    "SoftLabelStore",
    "Tape",
    "Tensor",
    "TrainConfig",
    "TrainReport",
    "evaluate",
    "run_sweep",
    "summarize_sweep",
    "train",
]
