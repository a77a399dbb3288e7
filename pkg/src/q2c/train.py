"""Epoch loop shared by the quantum, classical and ablation phases."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from . import nn
from .data import AssayDataset, batches
from .metrics import CurveLogger, UndefinedAUC, roc_auc
from .model import ModelCheckpoint, loss_and_grads, predict


@dataclass(frozen=True)
class EpochResult:
    epoch: int
    phase: str
    train_loss: float
    test_loss: float
    train_auc: float
    test_auc: float


def _auc(scores, labels) -> float:
    try:
        return roc_auc(scores, labels)
    except UndefinedAUC:
        return float("nan")


def train_epoch(ckpt: ModelCheckpoint, dataset: AssayDataset, batch_size: int,
                shuffle_seed: int) -> tuple[ModelCheckpoint, float, float]:
    """One pass over the training split.

    Returns the updated checkpoint, the sample-weighted mean of the batch losses
    and the ROC-AUC of the predictions made during the pass.
    """
    params, adam = ckpt.params, ckpt.adam
    total, seen = 0.0, 0
    scores, labels = [], []
    epoch = ckpt.epoch + 1
    for grids, y, _ in batches(dataset, "train", batch_size, epoch_seed=[shuffle_seed, epoch]):
        loss, grads, prob = loss_and_grads(params, ckpt.spec, grids, y, return_prob=True)
        params, adam = nn.adam_step(params, grads, adam)
        total += loss * len(y)
        seen += len(y)
        scores.append(prob)
        labels.append(y)
    new = replace(ckpt, params=params, adam=adam, epoch=epoch)
    mean = total / seen if seen else float("nan")
    auc = _auc(np.concatenate(scores), np.concatenate(labels)) if seen else float("nan")
    return new, mean, auc


def evaluate(ckpt: ModelCheckpoint, dataset: AssayDataset, split: str = "test") -> tuple[float, float, np.ndarray]:
    """(mean BCE, ROC-AUC, predictions) on a split, in split order."""
    idx = dataset.split(split)
    prob = predict(ckpt.params, ckpt.spec, dataset.grids[idx])
    if len(idx) == 0:
        return float("nan"), float("nan"), prob
    y = dataset.labels[idx]
    return float(nn.bce_loss(prob, y).mean()), _auc(prob, y), prob


def run(ckpt: ModelCheckpoint, dataset: AssayDataset, epochs: int, batch_size: int = 32,
        shuffle_seed: int = 0, logger: CurveLogger | None = None,
        on_epoch: Callable[[ModelCheckpoint, EpochResult], None] | None = None
        ) -> tuple[ModelCheckpoint, list[EpochResult]]:
    """Train for ``epochs`` more epochs; epoch numbers continue from the checkpoint."""
    results = []
    for _ in range(epochs):
        ckpt, train_loss, train_auc = train_epoch(ckpt, dataset, batch_size, shuffle_seed)
        test_loss, test_auc, _ = evaluate(ckpt, dataset, "test")
        res = EpochResult(ckpt.epoch, ckpt.phase, train_loss, test_loss, train_auc, test_auc)
        if logger is not None:
            logger.log(res.epoch, res.phase, train_loss, test_loss, train_auc, test_auc)
        if on_epoch is not None:
            on_epoch(ckpt, res)
        results.append(res)
    return ckpt, results
