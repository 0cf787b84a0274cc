"""Confusion matrix, ROC curve, and AUC.

Label convention: 0 is "real" and counts as the POSITIVE class, 1 is
"bogus" and negative. This is inverted relative to common practice, so
scores passed to the ROC are P(real) and the curve is swept for
detecting real transients.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from realbogus.errors import DataError, UndefinedMetricError

POSITIVE_LABEL = 0  # "real"


@dataclass
class ConfusionMatrix:
    tp: int
    fn: int
    fp: int
    tn: int

    @property
    def n(self):
        return self.tp + self.fn + self.fp + self.tn

    @property
    def accuracy(self):
        return (self.tp + self.tn) / self.n

    @property
    def tp_rate(self):
        return self.tp / (self.tp + self.fn)

    @property
    def fn_rate(self):
        return self.fn / (self.tp + self.fn)

    @property
    def fp_rate(self):
        return self.fp / (self.fp + self.tn)

    @property
    def tn_rate(self):
        return self.tn / (self.fp + self.tn)


@dataclass
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float


def confusion(labels, predictions):
    """Counts with positive == label 0 (real)."""
    labels = np.asarray(labels)
    predictions = np.asarray(predictions)
    if labels.shape != predictions.shape:
        raise DataError("labels and predictions differ in length")
    for arr, name in ((labels, "labels"), (predictions, "predictions")):
        if not np.isin(arr, (0, 1)).all():
            raise DataError(f"{name} outside {{0, 1}}")
    pos, neg = labels == POSITIVE_LABEL, labels != POSITIVE_LABEL
    pred_pos = predictions == POSITIVE_LABEL
    return ConfusionMatrix(
        tp=int((pos & pred_pos).sum()),
        fn=int((pos & ~pred_pos).sum()),
        fp=int((neg & pred_pos).sum()),
        tn=int((neg & ~pred_pos).sum()),
    )


def roc_auc(labels, scores):
    """ROC for detecting the positive class (real) from P(real) scores.

    Threshold sweep over the unique scores; AUC by trapezoidal
    integration, which equals Mann-Whitney pair counting with half
    credit for ties.
    """
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=np.float64)
    if labels.shape != scores.shape:
        raise DataError("labels and scores differ in length")
    n_pos = int((labels == POSITIVE_LABEL).sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC undefined for one-class input")
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    is_pos = (labels[order] == POSITIVE_LABEL).astype(np.float64)
    tp_cum = np.cumsum(is_pos)
    fp_cum = np.cumsum(1.0 - is_pos)
    # keep the last point of every tied-score run
    last_of_run = np.append(sorted_scores[1:] != sorted_scores[:-1], True)
    tpr = np.concatenate([[0.0], tp_cum[last_of_run] / n_pos])
    fpr = np.concatenate([[0.0], fp_cum[last_of_run] / n_neg])
    thresholds = np.concatenate([[np.inf], sorted_scores[last_of_run]])
    auc = float(np.trapezoid(tpr, fpr))
    return RocCurve(fpr=fpr, tpr=tpr, thresholds=thresholds, auc=auc)


def write_confusion_csv(cm, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["tp", "fn", "fp", "tn",
                         "tp_rate", "fn_rate", "fp_rate", "tn_rate"])
        writer.writerow([cm.tp, cm.fn, cm.fp, cm.tn,
                         cm.tp_rate, cm.fn_rate, cm.fp_rate, cm.tn_rate])


def write_roc_csv(curve, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["fpr", "tpr", "threshold"])
        for f, t, th in zip(curve.fpr, curve.tpr, curve.thresholds):
            writer.writerow([f, t, th])
