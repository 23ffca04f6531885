"""Accuracy and confidence-calibration metrics."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

__all__ = ["ReliabilityBins", "EceReport", "accuracy", "compute_ece", "reliability_export"]


def accuracy(predictions, labels) -> float:
    """Fraction of matching entries."""
    pred = np.asarray(predictions)
    ref = np.asarray(labels)
    if pred.shape != ref.shape or pred.ndim != 1:
        raise ValueError(f"predictions {pred.shape} and labels {ref.shape} must be equal 1-d")
    if pred.size == 0:
        raise ValueError("cannot score an empty batch")
    return float((pred == ref).mean())


@dataclass(frozen=True)
class ReliabilityBins:
    """Per-bin tallies over the unit confidence interval.

    Bin ``m`` covers ``(edges[m], edges[m+1]]``; a confidence equal to a
    boundary belongs to the lower bin, except exactly 0, which lands in
    the first bin. Average fields are NaN for empty bins.
    """

    edges: np.ndarray  # (num_bins + 1,)
    counts: np.ndarray  # (num_bins,) int
    avg_confidence: np.ndarray  # (num_bins,), NaN where empty
    avg_accuracy: np.ndarray  # (num_bins,), NaN where empty


@dataclass(frozen=True)
class EceReport:
    ece: float
    bins: ReliabilityBins
    num_samples: int


def compute_ece(confidences, correct, num_bins: int = 15) -> EceReport:
    """Expected calibration error over equal-width confidence bins.

    ``sum_m (|B_m| / n) * |accuracy(B_m) - confidence(B_m)|`` where the
    ``B_m`` partition ``(0, 1]`` into ``num_bins`` equal bins. Empty bins
    contribute nothing.
    """
    conf = np.asarray(confidences, dtype=np.float64)
    hits = np.asarray(correct, dtype=bool)
    if conf.ndim != 1 or conf.shape != hits.shape:
        raise ValueError(f"confidences {conf.shape} and correct {hits.shape} must be equal 1-d")
    if conf.size == 0:
        raise ValueError("cannot calibrate an empty batch")
    if num_bins < 1:
        raise ValueError(f"num_bins must be >= 1, got {num_bins}")
    if conf.min() < 0.0 or conf.max() > 1.0:
        raise ValueError("confidences must lie in [0, 1]")

    upper = np.arange(1, num_bins + 1) / num_bins
    # first index whose upper edge is >= c, i.e. the (low, high] bin; c=0 joins bin 0
    which = np.searchsorted(upper, conf, side="left")

    counts = np.bincount(which, minlength=num_bins)
    conf_sums = np.bincount(which, weights=conf, minlength=num_bins)
    hit_sums = np.bincount(which, weights=hits.astype(np.float64), minlength=num_bins)
    with np.errstate(invalid="ignore"):
        avg_conf = conf_sums / counts
        avg_acc = hit_sums / counts
    occupied = counts > 0
    ece = float(
        np.sum((counts[occupied] / conf.size) * np.abs(avg_acc[occupied] - avg_conf[occupied]))
    )
    bins = ReliabilityBins(
        edges=np.concatenate(([0.0], upper)),
        counts=counts,
        avg_confidence=avg_conf,
        avg_accuracy=avg_acc,
    )
    return EceReport(ece=ece, bins=bins, num_samples=conf.size)


def reliability_export(report: EceReport, path) -> None:
    """Write one CSV row per bin plus a trailing comment row with the ECE.

    Header is ``bin_low,bin_high,count,avg_conf,avg_acc``; empty bins
    leave the two average fields empty.
    """
    bins = report.bins
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_low", "bin_high", "count", "avg_conf", "avg_acc"])
        for m in range(len(bins.counts)):
            empty = bins.counts[m] == 0
            writer.writerow(
                [
                    repr(float(bins.edges[m])),
                    repr(float(bins.edges[m + 1])),
                    int(bins.counts[m]),
                    "" if empty else repr(float(bins.avg_confidence[m])),
                    "" if empty else repr(float(bins.avg_accuracy[m])),
                ]
            )
        fh.write(f"# ece,{report.ece!r}\r\n")
