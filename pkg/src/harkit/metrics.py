"""Per-label and macro-averaged MCC / F1 evaluation for all three heads.

All metrics operate on binary prediction and truth matrices of shape (N, C).
Multi-class heads (user identity) are evaluated label-wise on their one-hot
encodings, so the same confusion machinery serves every head.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ConfusionCounts:
    """Binary confusion counts for a single label."""

    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass
class MetricsReport:
    """Per-label metrics plus unweighted macro averages for one head."""

    head: str
    labels: list[str]
    counts: list[ConfusionCounts]
    per_label: dict[str, dict] = field(default_factory=dict)
    macro_mcc: float = 0.0
    macro_f1: float = 0.0

    def __post_init__(self):
        if not self.per_label:
            for name, c in zip(self.labels, self.counts):
                self.per_label[name] = {
                    "tp": c.tp, "fp": c.fp, "tn": c.tn, "fn": c.fn,
                    "precision": precision(c),
                    "recall": recall(c),
                    "f1": f1_score(c),
                    "mcc": mcc(c),
                }
            self.macro_mcc = float(np.mean([v["mcc"] for v in self.per_label.values()]))
            self.macro_f1 = float(np.mean([v["f1"] for v in self.per_label.values()]))


def confusion_counts(pred: np.ndarray, truth: np.ndarray) -> list[ConfusionCounts]:
    """Per-label binary confusion counts from (N, C) prediction/truth matrices."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape or pred.ndim != 2:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs truth {truth.shape}")
    for name, m in (("pred", pred), ("truth", truth)):
        if not np.isin(m, (0, 1)).all():
            raise ValueError(f"{name} entries must be binary")
    p = pred.astype(bool)
    t = truth.astype(bool)
    tp = (p & t).sum(axis=0)
    fp = (p & ~t).sum(axis=0)
    tn = (~p & ~t).sum(axis=0)
    fn = (~p & t).sum(axis=0)
    return [ConfusionCounts(int(tp[c]), int(fp[c]), int(tn[c]), int(fn[c]))
            for c in range(pred.shape[1])]


def mcc(c: ConfusionCounts) -> float:
    """Matthews correlation coefficient; 0 when any denominator factor is 0.

    Products are taken in Python ints, so large counts cannot overflow.
    """
    tp, fp, tn, fn = int(c.tp), int(c.fp), int(c.tn), int(c.fn)
    denom_sq = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if denom_sq == 0:
        return 0.0
    return float((tp * tn - fp * fn) / math.sqrt(denom_sq))


def precision(c: ConfusionCounts) -> float:
    return c.tp / (c.tp + c.fp) if (c.tp + c.fp) > 0 else 0.0


def recall(c: ConfusionCounts) -> float:
    return c.tp / (c.tp + c.fn) if (c.tp + c.fn) > 0 else 0.0


def f1_score(c: ConfusionCounts) -> float:
    """Harmonic mean of precision and recall, with the 0/0 -> 0 convention."""
    p = precision(c)
    r = recall(c)
    return 2 * p * r / (p + r) if (p + r) > 0 else 0.0


def macro_f1(counts: list[ConfusionCounts]) -> float:
    """Unweighted mean of per-label F1 scores."""
    return float(np.mean([f1_score(c) for c in counts]))


def macro_mcc(counts: list[ConfusionCounts]) -> float:
    """Unweighted mean of per-label MCC values."""
    return float(np.mean([mcc(c) for c in counts]))


def threshold_predictions(logits: np.ndarray, head_kind: str,
                          threshold: float = 0.5) -> np.ndarray:
    """Turn head logits into binary predictions.

    Multi-label heads (activity, context) threshold the sigmoid at
    ``threshold``; the user head takes the argmax as a one-hot row, ties
    resolved toward the lowest index.
    """
    logits = np.asarray(logits, dtype=float)
    if not np.isfinite(logits).all():
        raise ValueError("logits must be finite")
    if head_kind == "user":
        out = np.zeros_like(logits, dtype=np.int8)
        out[np.arange(logits.shape[0]), np.argmax(logits, axis=1)] = 1
        return out
    # sigmoid(x) > 0.5 is x > 0; keep the general form for non-default thresholds
    if threshold == 0.5:
        return (logits > 0).astype(np.int8)
    return (1.0 / (1.0 + np.exp(-logits)) > threshold).astype(np.int8)


def evaluate_head(logits: np.ndarray, truth: np.ndarray, head: str,
                  label_names: list[str], threshold: float = 0.5) -> MetricsReport:
    """Threshold logits and compute the full per-label report for one head."""
    pred = threshold_predictions(logits, head, threshold)
    counts = confusion_counts(pred, truth)
    return MetricsReport(head=head, labels=list(label_names), counts=counts)
