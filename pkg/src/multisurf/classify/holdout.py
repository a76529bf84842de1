"""Stratified holdout split and evaluation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ClassTooSmall, EmptyTable
from ..ingest import RadarTable
from ..rng import SeededDraws
from .config import TrainConfig
from .models import RadarModel, train


def stratified_split(table: RadarTable, fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Per class, round(fraction * n_c) rows go to train (clamped to keep one on each side).

    Classes are visited in ``class_labels`` order; classes with no rows are
    ignored. Both returned index arrays are sorted.
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must lie in (0, 1)")
    codes = table.label_codes
    draws = SeededDraws(seed)
    train_parts, test_parts = [], []
    for k, label in enumerate(table.class_labels):
        idx = np.flatnonzero(codes == k)
        n_c = idx.shape[0]
        if n_c == 0:
            continue
        if n_c < 2:
            raise ClassTooSmall(label, n_c)
        perm = idx[draws.permutation(n_c)]
        n_train = min(max(math.floor(fraction * n_c + 0.5), 1), n_c - 1)
        train_parts.append(perm[:n_train])
        test_parts.append(perm[n_train:])
    if not train_parts:
        raise EmptyTable("radar table")
    return np.sort(np.concatenate(train_parts)), np.sort(np.concatenate(test_parts))


def confusion_matrix(truth: np.ndarray, predicted: np.ndarray, n_classes: int) -> np.ndarray:
    """Rows are true classes, columns predicted classes."""
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (truth, predicted), 1)
    return cm


@dataclass(frozen=True, eq=False)
class HoldoutResult:
    accuracy: float
    confusion: np.ndarray
    class_labels: tuple[str, ...]
    train_indices: np.ndarray
    test_indices: np.ndarray
    predicted: tuple[str, ...]
    model: RadarModel

    def to_dict(self, include_model: bool = False) -> dict:
        d = {
            "accuracy": self.accuracy,
            "class_labels": list(self.class_labels),
            "confusion": self.confusion.tolist(),
            "train_indices": self.train_indices.tolist(),
            "test_indices": self.test_indices.tolist(),
            "predicted": list(self.predicted),
            "algorithm": self.model.algorithm,
            "config": self.model.config.to_dict(),
        }
        if include_model:
            d["model"] = self.model.to_dict()
        return d

    def __eq__(self, other):
        if not isinstance(other, HoldoutResult):
            return NotImplemented
        return self.to_dict(include_model=True) == other.to_dict(include_model=True)


def evaluate_holdout(table: RadarTable, config: TrainConfig) -> HoldoutResult:
    """Train on the stratified train split and score the held-out rows."""
    train_idx, test_idx = stratified_split(table, config.split_fraction, config.seed)
    if test_idx.shape[0] == 0:
        raise EmptyTable("test split")
    model = train(table.subset(train_idx), config)
    test = table.subset(test_idx)
    pred = model.predict_codes(test.features)
    truth = test.label_codes
    cm = confusion_matrix(truth, pred, len(table.class_labels))
    cm.setflags(write=False)
    accuracy = float(np.trace(cm)) / float(test_idx.shape[0])
    return HoldoutResult(
        accuracy=accuracy,
        confusion=cm,
        class_labels=table.class_labels,
        train_indices=train_idx,
        test_indices=test_idx,
        predicted=tuple(table.class_labels[i] for i in pred),
        model=model,
    )
