"""Trained radar models, training entry points and JSON serialization."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import EmptyTable
from ..ingest import RadarTable
from .config import TrainConfig
from .forest import DecisionTree, fit_forest, forest_vote
from .svm import decision_values, fit_linear_svm

MODEL_FORMAT = "multisurf-radar-model"
MODEL_VERSION = 1


@dataclass(frozen=True, eq=False)
class RadarModel:
    class_labels: tuple[str, ...]
    config: TrainConfig

    algorithm = "abstract"

    @property
    def train_seed(self) -> int:
        return self.config.seed

    def predict_codes(self, X) -> np.ndarray:  # pragma: no cover - interface
        raise NotImplementedError

    def predict(self, X) -> list[str]:
        return [self.class_labels[i] for i in self.predict_codes(X)]

    def _params(self) -> dict:  # pragma: no cover - interface
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "algorithm": self.algorithm,
            "class_labels": list(self.class_labels),
            "train_seed": self.train_seed,
            "config": self.config.to_dict(),
            "params": self._params(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def __eq__(self, other):
        if not isinstance(other, RadarModel):
            return NotImplemented
        return self.to_dict() == other.to_dict()


@dataclass(frozen=True, eq=False)
class ForestModel(RadarModel):
    trees: tuple[DecisionTree, ...] = ()

    algorithm = "random_forest"

    def predict_codes(self, X) -> np.ndarray:
        return forest_vote(self.trees, X, len(self.class_labels))

    def _params(self) -> dict:
        return {"trees": [t.to_dict() for t in self.trees]}


@dataclass(frozen=True, eq=False)
class LinearSVMModel(RadarModel):
    weights: np.ndarray = None
    bias: np.ndarray = None
    mean: np.ndarray = None
    scale: np.ndarray = None
    objective_trace: np.ndarray = ()  # kept training objective after each epoch

    algorithm = "linear_svm"

    def __post_init__(self):
        for name in ("weights", "bias", "mean", "scale", "objective_trace"):
            arr = np.array(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def decision_function(self, X) -> np.ndarray:
        return decision_values(X, self.weights, self.bias, self.mean, self.scale)

    def predict_codes(self, X) -> np.ndarray:
        # argmax keeps the first maximum: ties resolve in class order
        return np.argmax(self.decision_function(X), axis=1)

    def _params(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "bias": self.bias.tolist(),
            "mean": self.mean.tolist(),
            "scale": self.scale.tolist(),
            "objective_trace": self.objective_trace.tolist(),
        }


def _require_rows(table: RadarTable):
    if len(table) == 0:
        raise EmptyTable("training table")


def train_random_forest(table: RadarTable, config: TrainConfig) -> ForestModel:
    if config.algorithm != "random_forest":
        raise ValueError("config.algorithm must be random_forest")
    _require_rows(table)
    trees = fit_forest(table.features, table.label_codes, len(table.class_labels), config.rf, config.seed)
    return ForestModel(table.class_labels, config, tuple(trees))


def train_linear_svm(table: RadarTable, config: TrainConfig) -> LinearSVMModel:
    if config.algorithm != "linear_svm":
        raise ValueError("config.algorithm must be linear_svm")
    _require_rows(table)
    w, b, mean, scale, trace = fit_linear_svm(
        table.features, table.label_codes, len(table.class_labels), config.svm, config.seed
    )
    return LinearSVMModel(table.class_labels, config, w, b, mean, scale, trace)


def train(table: RadarTable, config: TrainConfig) -> RadarModel:
    if config.algorithm == "random_forest":
        return train_random_forest(table, config)
    return train_linear_svm(table, config)


def model_from_dict(d: dict) -> RadarModel:
    if d.get("format") != MODEL_FORMAT or d.get("version") != MODEL_VERSION:
        raise ValueError("not a supported radar model document")
    config = TrainConfig.from_dict(d["config"])
    labels: Sequence[str] = tuple(d["class_labels"])
    p = d["params"]
    if d["algorithm"] == "random_forest":
        return ForestModel(labels, config, tuple(DecisionTree(**t) for t in p["trees"]))
    if d["algorithm"] == "linear_svm":
        return LinearSVMModel(
            labels, config, p["weights"], p["bias"], p["mean"], p["scale"], p.get("objective_trace", ())
        )
    raise ValueError(f"unknown algorithm {d['algorithm']!r}")


def model_from_json(text: str) -> RadarModel:
    return model_from_dict(json.loads(text))
