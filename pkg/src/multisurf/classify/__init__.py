"""Local radar-table classifiers: random forest and one-vs-rest linear SVM."""

from ._kernels import BACKEND
from .config import ALGORITHMS, ForestParams, SVMParams, TrainConfig
from .forest import DecisionTree
from .holdout import HoldoutResult, confusion_matrix, evaluate_holdout, stratified_split
from .models import (
    ForestModel,
    LinearSVMModel,
    RadarModel,
    model_from_dict,
    model_from_json,
    train,
    train_linear_svm,
    train_random_forest,
)

__all__ = [
    "ALGORITHMS",
    "BACKEND",
    "DecisionTree",
    "ForestModel",
    "ForestParams",
    "HoldoutResult",
    "LinearSVMModel",
    "RadarModel",
    "SVMParams",
    "TrainConfig",
    "confusion_matrix",
    "evaluate_holdout",
    "model_from_dict",
    "model_from_json",
    "stratified_split",
    "train",
    "train_linear_svm",
    "train_random_forest",
]
