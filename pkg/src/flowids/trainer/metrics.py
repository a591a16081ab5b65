"""Confusion matrices, per-class precision/recall/F1 and the evaluation report.

A report is a single text document with three sections::

    [summary]       key = value lines
    [per_class]     CSV: class,support,precision,recall,f1
    [confusion]     CSV: rows are true classes, columns predicted classes

Floats are written with 17 significant digits so parsing a report gives
back exactly the numbers that were computed.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ..errors import DataError, UsageError

REPORT_HEADER = "# flowids evaluation report"


def precision_recall_f1(tp: float, fp: float, fn: float) -> tuple[float, float, float]:
    """Any 0/0 is taken as 0."""
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return float(p), float(r), float(f)


def confusion_matrix(y_true, y_pred, n_classes: int) -> np.ndarray:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise DataError(f"confusion_matrix: {y_true.shape[0]} labels vs {y_pred.shape[0]} predictions")
    for name, y in (("label", y_true), ("prediction", y_pred)):
        bad = np.flatnonzero((y < 0) | (y >= n_classes))
        if bad.size:
            raise DataError(f"{name} {y[bad[0]]} at position {bad[0]} outside [0, {n_classes})")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    return cm


def argmax_lower(logits: np.ndarray) -> np.ndarray:
    """Row argmax; ties go to the lower class index."""
    return np.argmax(np.asarray(logits), axis=1)


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


@dataclass
class EvalReport:
    class_names: list[str]
    confusion: np.ndarray
    task: str = "multiclass"
    info: dict = field(default_factory=dict)    # model, dataset, split, split_source ...

    @classmethod
    def from_predictions(cls, y_true, y_pred, class_names: Sequence[str], task: str = "multiclass",
                         info: Optional[dict] = None) -> "EvalReport":
        cm = confusion_matrix(y_true, y_pred, len(class_names))
        return cls(list(class_names), cm, task, dict(info or {}))

    @property
    def n(self) -> int:
        return int(self.confusion.sum())

    @property
    def support(self) -> np.ndarray:
        return self.confusion.sum(axis=1)

    def per_class(self) -> list[tuple[float, float, float]]:
        cm = self.confusion
        out = []
        for c in range(cm.shape[0]):
            tp = cm[c, c]
            out.append(precision_recall_f1(tp, cm[:, c].sum() - tp, cm[c, :].sum() - tp))
        return out

    @property
    def precision(self) -> np.ndarray:
        return np.array([p for p, _, _ in self.per_class()])

    @property
    def recall(self) -> np.ndarray:
        return np.array([r for _, r, _ in self.per_class()])

    @property
    def f1(self) -> np.ndarray:
        return np.array([f for _, _, f in self.per_class()])

    @property
    def accuracy(self) -> float:
        if self.n == 0:
            raise UsageError("accuracy of an empty evaluation set")
        return float(np.trace(self.confusion) / self.n)

    @property
    def weighted_f1(self) -> float:
        return weighted_f1(self)

    @property
    def binary_f1(self) -> Optional[float]:
        """F1 of the attack class (index 1) for two-class reports."""
        if len(self.class_names) != 2:
            return None
        return self.per_class()[1][2]

    # -- text form -------------------------------------------------------------

    def summary(self) -> dict:
        s = dict(self.info)
        s.update(task=self.task, n=self.n, accuracy=self.accuracy, weighted_f1=self.weighted_f1)
        if self.binary_f1 is not None:
            s["binary_f1"] = self.binary_f1
        return s

    def to_text(self) -> str:
        out = io.StringIO()
        out.write(REPORT_HEADER + "\n\n[summary]\n")
        for k, v in self.summary().items():
            out.write(f"{k} = {_fmt(v) if isinstance(v, (int, float, np.number)) else v}\n")
        out.write("\n[per_class]\n")
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["class", "support", "precision", "recall", "f1"])
        for name, s, (p, r, f) in zip(self.class_names, self.support, self.per_class()):
            w.writerow([name, int(s), _fmt(p), _fmt(r), _fmt(f)])
        out.write("\n[confusion]\n")
        w.writerow(["true\\pred"] + self.class_names)
        for name, row in zip(self.class_names, self.confusion):
            w.writerow([name] + [int(x) for x in row])
        return out.getvalue()

    def write(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_text(), encoding="utf-8", newline="\n")
        return path


def weighted_f1(report: EvalReport) -> float:
    """Support-weighted mean of per-class F1."""
    support = report.support
    n = support.sum()
    if n == 0:
        raise UsageError("weighted F1 of an empty evaluation set")
    return float(sum(s / n * f for s, f in zip(support.tolist(), report.f1.tolist())))


def _sections(text: str) -> dict[str, list[str]]:
    sections: dict[str, list[str]] = {}
    current = None
    for line in text.splitlines():
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1]
            sections[current] = []
        elif current is not None and line.strip():
            sections[current].append(line)
    return sections


def parse_report(text: str) -> dict:
    """Summary values (numbers parsed), per-class rows and the confusion matrix."""
    if not text.startswith(REPORT_HEADER):
        raise DataError("not an evaluation report")
    sec = _sections(text)
    summary = {}
    for line in sec.get("summary", []):
        k, _, v = line.partition(" = ")
        try:
            summary[k] = int(v)
        except ValueError:
            try:
                summary[k] = float(v)
            except ValueError:
                summary[k] = v
    rows = list(csv.reader(sec.get("per_class", [])))
    per_class = {r[0]: {"support": int(r[1]), "precision": float(r[2]), "recall": float(r[3]),
                        "f1": float(r[4])} for r in rows[1:]}
    conf = list(csv.reader(sec.get("confusion", [])))
    names = conf[0][1:] if conf else []
    matrix = np.array([[int(x) for x in r[1:]] for r in conf[1:]], dtype=np.int64)
    return {"summary": summary, "per_class": per_class, "classes": names, "confusion": matrix}


def read_report(path) -> dict:
    return parse_report(Path(path).read_text(encoding="utf-8"))
