"""Confusion matrices, macro precision/recall/F1 and multiclass MCC."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import LabelError


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Counts with rows = true class, columns = predicted class."""

    counts: np.ndarray
    classes: tuple

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def correct(self) -> int:
        return int(np.trace(self.counts))

    @property
    def true_counts(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def predicted_counts(self) -> np.ndarray:
        return self.counts.sum(axis=0)


def confusion(y_true, y_pred, classes) -> ConfusionMatrix:
    classes = tuple(classes)
    index = {c: i for i, c in enumerate(classes)}
    y_true, y_pred = list(y_true), list(y_pred)
    if len(y_true) != len(y_pred):
        raise ValueError(f"length mismatch: {len(y_true)} true vs {len(y_pred)} predicted labels")
    counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        try:
            counts[index[t], index[p]] += 1
        except KeyError as exc:
            raise LabelError(f"label {exc.args[0]!r} not in classes {classes}") from None
    return ConfusionMatrix(counts, classes)


def macro_prf(cm: ConfusionMatrix) -> tuple[float, float, float]:
    """Unweighted means of per-class precision, recall and F1.

    Empty denominators contribute 0.
    """
    counts = cm.counts
    tp = np.diag(counts).astype(float)
    predicted = counts.sum(axis=0)
    actual = counts.sum(axis=1)
    precision = np.divide(tp, predicted, out=np.zeros_like(tp), where=predicted > 0)
    recall = np.divide(tp, actual, out=np.zeros_like(tp), where=actual > 0)
    denom = precision + recall
    f1 = np.divide(2 * precision * recall, denom, out=np.zeros_like(tp), where=denom > 0)
    return float(precision.mean()), float(recall.mean()), float(f1.mean())


def mcc_multiclass(cm: ConfusionMatrix) -> float:
    """Multiclass Matthews correlation coefficient; 0 when undefined."""
    counts = [[int(v) for v in row] for row in np.asarray(cm.counts)]
    k = len(counts)
    s = sum(map(sum, counts))
    c = sum(counts[i][i] for i in range(k))
    p = [sum(counts[i][j] for i in range(k)) for j in range(k)]
    b = [sum(row) for row in counts]
    # exact integer arithmetic up to the final square root
    numerator = c * s - sum(pk * bk for pk, bk in zip(p, b))
    left = s * s - sum(pk * pk for pk in p)
    right = s * s - sum(bk * bk for bk in b)
    if left == 0 or right == 0:
        return 0.0
    product = left * right
    root = math.isqrt(product)
    if root * root == product:
        return numerator / root  # int / int is correctly rounded
    try:
        return numerator / math.sqrt(product)
    except OverflowError:
        return numerator / (math.sqrt(left) * math.sqrt(right))


def scores(y_true, y_pred, classes) -> dict[str, float]:
    cm = confusion(y_true, y_pred, classes)
    precision, recall, f1 = macro_prf(cm)
    return {"precision": precision, "recall": recall, "f1": f1, "mcc": mcc_multiclass(cm)}
