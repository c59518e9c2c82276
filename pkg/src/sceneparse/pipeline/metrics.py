"""Pixel-level scene-parsing metrics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import InvalidInputError

VOID = -1


@dataclass(frozen=True, eq=False)
class Metrics:
    global_accuracy: float
    class_accuracy: float
    confusion: np.ndarray          # row-normalized; NaN rows have no support
    confusion_counts: np.ndarray
    support: np.ndarray

    @property
    def per_class_recall(self) -> np.ndarray:
        return np.diag(self.confusion)

    def table(self, class_names=None) -> str:
        names = class_names or [str(i) for i in range(len(self.support))]
        width = max(12, max(len(n) for n in names) + 2)
        lines = [f"{'global accuracy':<{width}} {self.global_accuracy:8.4f}",
                 f"{'class accuracy':<{width}} {self.class_accuracy:8.4f}",
                 f"{'class':<{width}} {'recall':>8} {'pixels':>10}"]
        for name, recall, sup in zip(names, self.per_class_recall, self.support):
            shown = "     n/a" if sup == 0 else f"{recall:8.4f}"
            lines.append(f"{name:<{width}} {shown} {int(sup):>10d}")
        return "\n".join(lines)


def confusion_counts(predicted, truth, n_classes) -> np.ndarray:
    """Unnormalized ``[truth, predicted]`` pixel counts, void truth excluded."""
    total = np.zeros((n_classes, n_classes), dtype=np.int64)
    for pred, gt in zip(predicted, truth):
        pred, gt = np.asarray(pred), np.asarray(gt)
        if pred.shape != gt.shape:
            raise InvalidInputError(f"prediction shape {pred.shape} != ground truth {gt.shape}")
        keep = gt != VOID
        p, g = pred[keep].astype(np.int64), gt[keep].astype(np.int64)
        if p.size and (p.min() < 0 or p.max() >= n_classes):
            raise InvalidInputError("predicted label outside [0, n_classes)")
        total += np.bincount(g * n_classes + p, minlength=n_classes * n_classes).reshape(
            n_classes, n_classes)
    return total


def evaluate(predicted, truth, n_classes) -> Metrics:
    """Global accuracy, mean per-class recall and the confusion matrix.

    Classes without ground-truth pixels are excluded from the class
    accuracy and get a NaN confusion row.
    """
    counts = confusion_counts(predicted, truth, n_classes)
    support = counts.sum(axis=1)
    total = support.sum()
    if total == 0:
        raise InvalidInputError("no non-void ground-truth pixels to evaluate")
    with np.errstate(invalid="ignore", divide="ignore"):
        confusion = counts / support[:, None]
    confusion[support == 0] = np.nan
    present = support > 0
    return Metrics(
        global_accuracy=float(np.trace(counts) / total),
        class_accuracy=float(np.mean(np.diag(confusion)[present])),
        confusion=confusion,
        confusion_counts=counts,
        support=support,
    )
