"""Confusion matrix, accuracy/precision/recall/F1, ROC curve, and AUC.

The attack class is positive everywhere. A prediction counts as attack
iff its score is >= the threshold. Degenerate metric denominators
(no predicted positives, or no actual positives) yield 0 and are flagged
on the report rather than raising.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self):
        for name in ("tp", "tn", "fp", "fn"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 0:
                raise ValueError(f"{name} must be a non-negative integer, got {v!r}")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    roc: tuple[tuple[float, float], ...]
    auc: float
    matrix: ConfusionMatrix
    degenerate: tuple[str, ...] = ()


def confusion(scores, labels, threshold: float) -> ConfusionMatrix:
    """Tally TP/TN/FP/FN with attack (label 1) as the positive class."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise DataError(f"scores {scores.shape} and labels {labels.shape} must be equal-length vectors")
    if scores.size == 0:
        raise DataError("cannot build a confusion matrix from zero samples")
    pred = scores >= threshold
    actual = labels == 1
    return ConfusionMatrix(
        tp=int(np.sum(pred & actual)),
        tn=int(np.sum(~pred & ~actual)),
        fp=int(np.sum(pred & ~actual)),
        fn=int(np.sum(~pred & actual)),
    )


def accuracy(m: ConfusionMatrix) -> float:
    if m.total == 0:
        raise DataError("empty confusion matrix")
    return (m.tp + m.tn) / (m.tp + m.tn + m.fp + m.fn)


def precision(m: ConfusionMatrix) -> float:
    if m.tp + m.fp == 0:
        return 0.0
    return m.tp / (m.tp + m.fp)


def recall(m: ConfusionMatrix) -> float:
    if m.tp + m.fn == 0:
        return 0.0
    return m.tp / (m.tp + m.fn)


def f1(m: ConfusionMatrix) -> float:
    p = precision(m)
    r = recall(m)
    if p + r == 0.0:
        return 0.0
    return 2 * p * r / (p + r)


def roc_curve(scores, labels) -> list[tuple[float, float]]:
    """(fpr, tpr) points from sweeping the threshold over distinct scores,
    descending; starts at (0,0), ends at (1,1)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1 or scores.size == 0:
        raise DataError("scores and labels must be equal-length non-empty vectors")
    actual = labels == 1
    pos = int(actual.sum())
    neg = int(scores.size - pos)
    if pos == 0 or neg == 0:
        raise DataError("ROC needs both classes present")
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_pos = actual[order].astype(np.int64)
    tp_cum = np.cumsum(sorted_pos)
    fp_cum = np.cumsum(1 - sorted_pos)
    # Keep only the last index of each run of equal scores.
    last = np.nonzero(np.diff(sorted_scores, append=np.nan))[0]
    points = [(0.0, 0.0)]
    points.extend((fp_cum[i] / neg, tp_cum[i] / pos) for i in last)
    return points


def auc(points) -> float:
    """Trapezoidal area under an ROC curve."""
    if len(points) < 2 or tuple(points[0]) != (0.0, 0.0) or tuple(points[-1]) != (1.0, 1.0):
        raise DataError("malformed ROC curve: must run from (0,0) to (1,1)")
    area = 0.0
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        if x1 < x0 or y1 < y0:
            raise DataError("malformed ROC curve: not monotone")
        area += (x1 - x0) * (y0 + y1) / 2.0
    return area


def evaluate(scores, labels, threshold: float) -> EvalReport:
    m = confusion(scores, labels, threshold)
    degenerate = []
    if m.tp + m.fp == 0:
        degenerate.append("precision")
    if m.tp + m.fn == 0:
        degenerate.append("recall")
    roc = tuple(roc_curve(scores, labels))
    return EvalReport(
        accuracy=accuracy(m),
        precision=precision(m),
        recall=recall(m),
        f1=f1(m),
        roc=roc,
        auc=auc(roc),
        matrix=m,
        degenerate=tuple(degenerate),
    )


# ---------------------------------------------------------------------------
# report serialization (one row per classifier, table-for-table)


def report_json(reports: dict[str, EvalReport]) -> str:
    doc = {
        name: {
            "accuracy": r.accuracy,
            "precision": r.precision,
            "recall": r.recall,
            "f1": r.f1,
            "auc": r.auc,
            "confusion": {"tp": r.matrix.tp, "tn": r.matrix.tn, "fp": r.matrix.fp, "fn": r.matrix.fn},
            "degenerate": list(r.degenerate),
        }
        for name, r in reports.items()
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def metrics_csv(reports: dict[str, EvalReport]) -> str:
    buf = io.StringIO()
    buf.write("classifier,accuracy,precision,recall,f1\n")
    for name in sorted(reports):
        r = reports[name]
        buf.write(f"{name},{r.accuracy!r},{r.precision!r},{r.recall!r},{r.f1!r}\n")
    return buf.getvalue()


def confusion_csv(reports: dict[str, EvalReport]) -> str:
    buf = io.StringIO()
    buf.write("classifier,tp,tn,fp,fn\n")
    for name in sorted(reports):
        m = reports[name].matrix
        buf.write(f"{name},{m.tp},{m.tn},{m.fp},{m.fn}\n")
    return buf.getvalue()


def auc_csv(reports: dict[str, EvalReport]) -> str:
    buf = io.StringIO()
    buf.write("classifier,auc\n")
    for name in sorted(reports):
        buf.write(f"{name},{reports[name].auc!r}\n")
    return buf.getvalue()


def roc_csv(report: EvalReport) -> str:
    buf = io.StringIO()
    buf.write("fpr,tpr\n")
    for x, y in report.roc:
        buf.write(f"{x!r},{y!r}\n")
    return buf.getvalue()
