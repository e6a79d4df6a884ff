"""Confusion matrix, accuracy and macro-averaged precision / recall."""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are true classes, columns predicted classes."""

    counts: np.ndarray
    class_names: tuple[str, ...]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["true\\pred", *self.class_names])
        for name, row in zip(self.class_names, self.counts):
            writer.writerow([name, *(int(v) for v in row)])
        return buf.getvalue()


@dataclass(frozen=True)
class Scores:
    accuracy: float
    macro_precision: float
    macro_recall: float
    precision: tuple[float, ...]
    recall: tuple[float, ...]
    # classes whose precision or recall had a zero denominator (scored as 0)
    undefined: tuple[int, ...] = ()

    def as_percent(self) -> dict[str, str]:
        return {
            "accuracy": f"{100 * self.accuracy:.4f}",
            "precision": f"{100 * self.macro_precision:.4f}",
            "recall": f"{100 * self.macro_recall:.4f}",
        }


def confusion(
    preds: Sequence[int], labels: Sequence[int], class_names: Sequence[str]
) -> ConfusionMatrix:
    preds = np.asarray(preds, dtype=np.int64).reshape(-1)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    c = len(class_names)
    if preds.shape != labels.shape:
        raise ValueError(f"{len(preds)} predictions for {len(labels)} labels")
    for name, arr in (("prediction", preds), ("label", labels)):
        if arr.size and (arr.min() < 0 or arr.max() >= c):
            raise ValueError(f"{name} out of range 0..{c - 1}")
    counts = np.zeros((c, c), dtype=np.int64)
    np.add.at(counts, (labels, preds), 1)
    return ConfusionMatrix(counts, tuple(class_names))


def scores(cm: ConfusionMatrix) -> Scores:
    counts = cm.counts
    total = counts.sum()
    if total == 0:
        raise ValueError("confusion matrix is empty")
    diag = np.diag(counts).astype(np.float64)
    col = counts.sum(axis=0)
    row = counts.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        precision = np.where(col > 0, diag / col, 0.0)
        recall = np.where(row > 0, diag / row, 0.0)
    undefined = tuple(int(c) for c in np.flatnonzero((col == 0) | (row == 0)))
    if undefined:
        names = [cm.class_names[c] for c in undefined]
        warnings.warn(f"zero-denominator classes scored as 0: {names}", stacklevel=2)
    return Scores(
        accuracy=float(diag.sum() / total),
        macro_precision=float(precision.mean()),
        macro_recall=float(recall.mean()),
        precision=tuple(float(p) for p in precision),
        recall=tuple(float(r) for r in recall),
        undefined=undefined,
    )


def format_report(s: Scores, class_names: Sequence[str]) -> str:
    lines = [f"{'metric':<10} {'value (%)':>10}"]
    for k, v in s.as_percent().items():
        lines.append(f"{k:<10} {v:>10}")
    lines.append("")
    lines.append(f"{'class':<8} {'precision':>10} {'recall':>10}")
    for name, p, r in zip(class_names, s.precision, s.recall):
        lines.append(f"{name:<8} {100 * p:>10.4f} {100 * r:>10.4f}")
    return "\n".join(lines)
