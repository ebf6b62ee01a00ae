"""Confusion matrices and the reported classification metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def confusion_matrix(y_true: np.ndarray, y_pred: np.ndarray, n_classes: int) -> np.ndarray:
    """conf[i, j] = count of examples with true class i predicted as j."""
    conf = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(conf, (np.asarray(y_true), np.asarray(y_pred)), 1)
    return conf


@dataclass
class MetricsReport:
    sensitivity: float
    specificity: float
    accuracy: float
    f1: float
    confusion: np.ndarray
    degenerate: bool = False  # a division-by-zero case was clamped to 0

    def as_dict(self) -> dict:
        return {
            "sensitivity": self.sensitivity,
            "specificity": self.specificity,
            "accuracy": self.accuracy,
            "f1": self.f1,
            "confusion": self.confusion.tolist(),
            "degenerate": self.degenerate,
        }


def compute_metrics(confusion: np.ndarray, positive_class: int) -> MetricsReport:
    """Sensitivity, specificity, accuracy and F1 for one positive class.

    Any metric whose denominator is zero is reported as 0 with the
    degenerate flag set.
    """
    conf = np.asarray(confusion, dtype=np.int64)
    total = conf.sum()
    if total == 0:
        raise ValueError("empty confusion matrix")
    p = positive_class
    tp = conf[p, p]
    fn = conf[p, :].sum() - tp
    fp = conf[:, p].sum() - tp
    tn = total - tp - fn - fp

    degenerate = False

    def ratio(num, den):
        nonlocal degenerate
        if den == 0:
            degenerate = True
            return 0.0
        return float(num) / float(den)

    return MetricsReport(
        sensitivity=ratio(tp, tp + fn),
        specificity=ratio(tn, tn + fp),
        accuracy=ratio(tp + tn, total),
        f1=ratio(2 * tp, 2 * tp + fp + fn),
        confusion=conf,
        degenerate=degenerate,
    )


@dataclass
class RepeatedMetrics:
    """Per-repeat metric reports plus their means and standard deviations."""

    repeats: list[MetricsReport]
    metric_names: tuple = ("sensitivity", "specificity", "accuracy", "f1")

    def mean(self, name: str) -> float:
        return float(np.mean([getattr(r, name) for r in self.repeats]))

    def std(self, name: str) -> float:
        return float(np.std([getattr(r, name) for r in self.repeats]))

    def as_dict(self) -> dict:
        return {
            "repeats": [r.as_dict() for r in self.repeats],
            "mean": {m: self.mean(m) for m in self.metric_names},
            "std": {m: self.std(m) for m in self.metric_names},
        }
