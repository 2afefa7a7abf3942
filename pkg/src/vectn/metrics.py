"""Accuracy, per-class F1, macro-F1, and the 3x3 confusion matrix."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import TrainingError

N_CLASSES = 3


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    macro_f1: float
    per_class_f1: tuple[float, float, float]
    confusion: tuple[tuple[int, ...], ...]  # rows: true label, cols: predicted

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "per_class_f1": list(self.per_class_f1),
            "confusion": [list(row) for row in self.confusion],
        }


def confusion_matrix(true_labels, predicted_labels) -> np.ndarray:
    true_arr = np.asarray(true_labels, dtype=int)
    pred_arr = np.asarray(predicted_labels, dtype=int)
    if true_arr.shape != pred_arr.shape:
        raise TrainingError(f"label shapes differ: {true_arr.shape} vs {pred_arr.shape}")
    matrix = np.zeros((N_CLASSES, N_CLASSES), dtype=int)
    np.add.at(matrix, (true_arr, pred_arr), 1)
    return matrix


def accuracy(confusion: np.ndarray) -> float:
    confusion = np.asarray(confusion)
    total = int(confusion.sum())
    if total == 0:
        raise TrainingError("empty confusion matrix")
    return float(np.trace(confusion)) / total


def per_class_f1(confusion: np.ndarray) -> np.ndarray:
    """F1 per class from a (true x predicted) matrix; a zero precision+
    recall denominator scores 0 for that class."""
    confusion = np.asarray(confusion, dtype=float)
    tp = np.diag(confusion)
    predicted = confusion.sum(axis=0)
    actual = confusion.sum(axis=1)
    f1 = np.zeros(confusion.shape[0])
    for k in range(confusion.shape[0]):
        precision = tp[k] / predicted[k] if predicted[k] > 0 else 0.0
        recall = tp[k] / actual[k] if actual[k] > 0 else 0.0
        if precision + recall > 0:
            f1[k] = 2.0 * precision * recall / (precision + recall)
    return f1


def macro_f1(confusion: np.ndarray) -> float:
    """Unweighted mean of per-class F1 scores."""
    confusion = np.asarray(confusion)
    if confusion.sum() == 0:
        raise TrainingError("all-zero confusion matrix")
    return float(per_class_f1(confusion).mean())


def compute_metrics(true_labels, predicted_labels) -> Metrics:
    matrix = confusion_matrix(true_labels, predicted_labels)
    return Metrics(
        accuracy=accuracy(matrix),
        macro_f1=macro_f1(matrix),
        per_class_f1=tuple(float(x) for x in per_class_f1(matrix)),
        confusion=tuple(tuple(int(x) for x in row) for row in matrix),
    )
