"""ROC-AUC (two independent routes) and the per-epoch training-curve CSV."""
from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CURVE_COLUMNS = ("epoch", "phase", "train_loss", "test_loss", "train_auc", "test_auc", "wall_time")
PHASES = ("quantum", "classical", "ablation")


class UndefinedAUC(ValueError):
    """Raised when only one class is present."""


def _check(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=float).reshape(-1)
    y = np.asarray(labels).reshape(-1)
    if s.shape != y.shape:
        raise ValueError(f"{s.size} scores vs {y.size} labels")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0 or 1")
    y = y.astype(int)
    if y.min(initial=1) == y.max(initial=0) or y.size == 0:
        raise UndefinedAUC("ROC-AUC needs both positive and negative labels")
    return s, y


def roc_curve(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    """(FPR, TPR) at every distinct threshold, from (0, 0) up to (1, 1)."""
    s, y = _check(scores, labels)
    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    last = np.r_[np.nonzero(np.diff(s))[0], s.size - 1]  # final index of each tie group
    tp = np.cumsum(y)[last]
    fp = (last + 1) - tp
    tpr = np.r_[0, tp] / y.sum()           # TP / (TP + FN)
    fpr = np.r_[0, fp] / (y.size - y.sum())  # FP / (FP + TN)
    return fpr, tpr


def roc_auc(scores, labels) -> float:
    """Trapezoidal area under the ROC curve; tied scores form one diagonal segment."""
    fpr, tpr = roc_curve(scores, labels)
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))


def roc_auc_rank(scores, labels) -> float:
    """Mann-Whitney U / (n_pos n_neg) using midranks, so each tie counts one half."""
    s, y = _check(scores, labels)
    _, inverse, counts = np.unique(s, return_inverse=True, return_counts=True)
    upper = np.cumsum(counts)
    midrank = upper - (counts - 1) / 2.0
    ranks = midrank[inverse]
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


@dataclass
class CurveLogger:
    """Append-only CSV of per-epoch metrics; the header is written once."""

    path: Path
    start: float = field(default_factory=time.perf_counter)

    def __post_init__(self):
        self.path = Path(self.path)
        if not self.path.exists() or self.path.stat().st_size == 0:
            with open(self.path, "w", newline="") as fh:
                csv.writer(fh).writerow(CURVE_COLUMNS)

    def log(self, epoch: int, phase: str, train_loss: float, test_loss: float,
            train_auc: float, test_auc: float) -> dict:
        if phase not in PHASES:
            raise ValueError(f"unknown phase {phase!r}")
        row = {"epoch": epoch, "phase": phase, "train_loss": repr(float(train_loss)),
               "test_loss": repr(float(test_loss)), "train_auc": repr(float(train_auc)),
               "test_auc": repr(float(test_auc)),
               "wall_time": f"{time.perf_counter() - self.start:.3f}"}
        with open(self.path, "a", newline="") as fh:
            csv.writer(fh).writerow([row[c] for c in CURVE_COLUMNS])
        return row


def read_curve(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
