"""Confusion matrices and F1 aggregates (weighted, micro, macro, and micro
with some classes left out of the pooling)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyError, LabelError, ShapeError


def confusion_matrix(true_labels, pred_labels, num_classes: int) -> np.ndarray:
    """``counts[t, p]``: rows are gold classes, columns predictions."""
    y = np.asarray(true_labels, dtype=np.int64).reshape(-1)
    p = np.asarray(pred_labels, dtype=np.int64).reshape(-1)
    if y.shape != p.shape:
        raise ShapeError(f"{y.size} gold labels vs {p.size} predictions")
    for arr in (y, p):
        if arr.size and (arr.min() < 0 or arr.max() >= num_classes):
            raise LabelError(f"labels must lie in [0, {num_classes})")
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(cm, (y, p), 1)
    return cm


def _ratio(num, den):
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    return np.divide(num, den, out=np.zeros_like(num), where=den > 0)


def f1_scores(cm: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-class precision, recall and F1; any 0/0 resolves to 0."""
    cm = np.asarray(cm)
    tp = np.diag(cm).astype(np.float64)
    precision = _ratio(tp, cm.sum(axis=0))
    recall = _ratio(tp, cm.sum(axis=1))
    f1 = _ratio(2 * precision * recall, precision + recall)
    return precision, recall, f1


def aggregate(cm: np.ndarray, mode: str, exclude: Iterable[int] = ()) -> float:
    cm = np.asarray(cm)
    k = cm.shape[0]
    excluded = set(exclude)
    if any(not 0 <= c < k for c in excluded):
        raise LabelError(f"excluded classes {sorted(excluded)} outside [0, {k})")
    keep = np.array([c for c in range(k) if c not in excluded], dtype=np.int64)
    if keep.size == 0:
        raise EmptyError("every class is excluded")
    if mode == "micro":
        tp = np.diag(cm)[keep].sum()
        fp = cm[:, keep].sum() - tp
        fn = cm[keep, :].sum() - tp
        p, r = _ratio(tp, tp + fp), _ratio(tp, tp + fn)
        return float(_ratio(2 * p * r, p + r))
    _, _, f1 = f1_scores(cm)
    if mode == "macro":
        return float(f1[keep].mean())
    if mode == "weighted":
        support = cm.sum(axis=1)[keep]
        total = support.sum()
        return float((f1[keep] * support).sum() / total) if total else 0.0
    raise ValueError(f"unknown aggregation mode {mode!r}")


@dataclass
class MetricsReport:
    confusion: np.ndarray
    label_names: list[str]
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    weighted_f1: float
    micro_f1: float
    macro_f1: float
    micro_f1_excl_neutral: float | None = None
    neutral_index: int | None = None

    @property
    def accuracy(self) -> float:
        total = self.confusion.sum()
        return float(np.trace(self.confusion) / total) if total else 0.0

    def summary(self) -> dict[str, float]:
        out = {
            "weighted_f1": self.weighted_f1,
            "micro_f1": self.micro_f1,
            "macro_f1": self.macro_f1,
        }
        if self.micro_f1_excl_neutral is not None:
            out["micro_f1_excl_neutral"] = self.micro_f1_excl_neutral
        out["accuracy"] = self.accuracy
        out["support"] = int(self.confusion.sum())
        return out

    def to_kv(self) -> str:
        return "".join(f"{k}={v:.6f}\n" if isinstance(v, float) else f"{k}={v}\n" for k, v in self.summary().items())

    def to_table(self) -> str:
        width = max(8, *(len(n) for n in self.label_names))
        support = self.confusion.sum(axis=1)
        lines = [f"{'class':<{width}}  precision  recall     f1  support"]
        for i, name in enumerate(self.label_names):
            lines.append(
                f"{name:<{width}}  {self.precision[i]:9.4f}  {self.recall[i]:6.4f}  {self.f1[i]:5.4f}  {support[i]:7d}"
            )
        return "\n".join(lines) + "\n"

    def confusion_text(self) -> str:
        width = max(6, *(len(n) for n in self.label_names), len(str(self.confusion.max(initial=0))))
        head = " " * width + "".join(f" {n:>{width}}" for n in self.label_names)
        rows = [head]
        for name, row in zip(self.label_names, self.confusion):
            rows.append(f"{name:<{width}}" + "".join(f" {v:>{width}d}" for v in row))
        return "\n".join(rows) + "\n"

    def render(self) -> str:
        return f"{self.to_table()}\n{self.confusion_text()}\n{self.to_kv()}"


def build_report(
    true_labels,
    pred_labels,
    label_names: Sequence[str],
    neutral_index: int | None = None,
) -> MetricsReport:
    cm = confusion_matrix(true_labels, pred_labels, len(label_names))
    precision, recall, f1 = f1_scores(cm)
    excl = None
    if neutral_index is not None and len(label_names) > 1:
        excl = aggregate(cm, "micro", exclude=[neutral_index])
    return MetricsReport(
        confusion=cm,
        label_names=list(label_names),
        precision=precision,
        recall=recall,
        f1=f1,
        weighted_f1=aggregate(cm, "weighted"),
        micro_f1=aggregate(cm, "micro"),
        macro_f1=aggregate(cm, "macro"),
        micro_f1_excl_neutral=excl,
        neutral_index=neutral_index,
    )
