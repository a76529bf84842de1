"""One-vs-rest linear SVM trained with Pegasos stochastic subgradient steps."""

from __future__ import annotations

import numpy as np

from . import _kernels
from ..errors import EmptyTable, SingleClass
from ..rng import SeededDraws
from .config import SVMParams


def standardization(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    return mean, np.where(std > 0, std, 0.0)


def standardize(X: np.ndarray, mean: np.ndarray, scale: np.ndarray) -> np.ndarray:
    # zero-variance columns map to 0
    safe = np.where(scale > 0, scale, 1.0)
    return np.where(scale > 0, (X - mean) / safe, 0.0)


def augment(Z: np.ndarray) -> np.ndarray:
    """Append the constant column that carries the bias."""
    return np.hstack([Z, np.ones((Z.shape[0], 1))])


def hinge_objective(W: np.ndarray, Z_aug: np.ndarray, Y: np.ndarray, lam: float) -> float:
    """Sum over classes of lam/2 * ||w||^2 + mean hinge loss."""
    margins = Y * (W @ Z_aug.T)
    hinge = np.maximum(0.0, 1.0 - margins).mean(axis=1)
    return float((0.5 * lam * (W * W).sum(axis=1) + hinge).sum())


def visiting_orders(n: int, epochs: int, seed: int) -> np.ndarray:
    draws = SeededDraws(seed)
    return np.stack([draws.permutation(n) for _ in range(epochs)])


def fit_linear_svm(X: np.ndarray, y: np.ndarray, n_classes: int, params: SVMParams, seed: int):
    """Train ``n_classes`` one-vs-rest hinge classifiers.

    The averaged iterate is read off at each epoch end; with ``keep_best`` a
    new average replaces the kept one only if its training objective does not
    increase. Returns ``(weights, bias, mean, scale, trace)`` where ``trace``
    holds the kept objective after each epoch.
    """
    n = X.shape[0]
    if n == 0:
        raise EmptyTable("training table")
    if np.unique(y).shape[0] < 2:
        raise SingleClass("a linear SVM needs at least two classes in the training data")
    X = np.asarray(X, dtype=np.float64)
    if params.standardize:
        mean, scale = standardization(X)
    else:
        mean, scale = np.zeros(X.shape[1]), np.ones(X.shape[1])
    Z = np.ascontiguousarray(augment(standardize(X, mean, scale)))
    Y = np.where(np.arange(n_classes)[:, None] == y[None, :], 1.0, -1.0)
    Y = np.ascontiguousarray(Y)
    orders = visiting_orders(n, params.epochs, seed)
    lam = params.regularization
    _, snaps = _kernels.pegasos(Z, Y, orders, lam, 1.0 / np.sqrt(lam))

    kept, kept_obj, trace = None, np.inf, []
    for W in snaps:
        obj = hinge_objective(W, Z, Y, lam)
        if not params.keep_best or obj <= kept_obj:
            kept, kept_obj = W, obj
        trace.append(kept_obj)
    return kept[:, :-1].copy(), kept[:, -1].copy(), mean, scale, np.array(trace)


def decision_values(X, weights, bias, mean, scale) -> np.ndarray:
    Z = standardize(np.asarray(X, dtype=np.float64), mean, scale)
    return Z @ weights.T + bias
