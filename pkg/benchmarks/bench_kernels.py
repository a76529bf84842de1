"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--rows 2000] [--features 16] [--repeat 5]

Each kernel is warmed up once (so JIT compilation is excluded) and the best
of ``--repeat`` runs is reported. The full random-forest row swaps both tree
kernels at once.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from multisurf.classify import ForestParams, _kernels
from multisurf.classify.forest import fit_forest
from multisurf.classify.svm import augment, visiting_orders
from multisurf.synthetic import separable_blobs


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def forest_with(split, apply, X, y, trees):
    saved = _kernels.best_split, _kernels.tree_apply
    _kernels.best_split, _kernels.tree_apply = split, apply
    try:
        return fit_forest(X, y, 2, ForestParams(n_trees=trees), seed=0)
    finally:
        _kernels.best_split, _kernels.tree_apply = saved


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=2000)
    ap.add_argument("--features", type=int, default=16)
    ap.add_argument("--trees", type=int, default=20)
    ap.add_argument("--epochs", type=int, default=5)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    if not _kernels.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    table = separable_blobs(args.rows, args.features, seed=0, separation=3.0)
    X = np.ascontiguousarray(table.features)
    y = table.label_codes.astype(np.int64)
    samples = np.arange(args.rows, dtype=np.int64)
    feats = np.arange(args.features, dtype=np.int64)

    tree = forest_with(_kernels.best_split_numba, _kernels.tree_apply_numba, X, y, 1)[0]
    tree_arrays = (tree.feature, tree.threshold, tree.left, tree.right, tree.value)

    Z = np.ascontiguousarray(augment(X))
    Y = np.ascontiguousarray(np.where(np.arange(2)[:, None] == y[None, :], 1.0, -1.0))
    orders = visiting_orders(args.rows, args.epochs, 0)

    cases = [
        ("best_split (root, all features)",
         lambda: _kernels.best_split_numpy(X, y, samples, feats, 2),
         lambda: _kernels.best_split_numba(X, y, samples, feats, 2)),
        ("tree_apply (one full tree)",
         lambda: _kernels.tree_apply_numpy(X, *tree_arrays),
         lambda: _kernels.tree_apply_numba(X, *tree_arrays)),
        (f"pegasos ({args.epochs} epochs)",
         lambda: _kernels.pegasos_numpy(Z, Y, orders, 1e-4, 100.0),
         lambda: _kernels.pegasos_numba(Z, Y, orders, 1e-4, 100.0)),
        (f"random forest fit ({args.trees} trees)",
         lambda: forest_with(_kernels.best_split_numpy, _kernels.tree_apply_numpy, X, y, args.trees),
         lambda: forest_with(_kernels.best_split_numba, _kernels.tree_apply_numba, X, y, args.trees)),
    ]

    print(f"rows={args.rows} features={args.features} repeat={args.repeat}")
    print(f"{'kernel':38s} {'numpy s':>10s} {'numba s':>10s} {'speedup':>8s}")
    for name, np_fn, nb_fn in cases:
        t_np = best_of(np_fn, args.repeat)
        t_nb = best_of(nb_fn, args.repeat)
        print(f"{name:38s} {t_np:10.4f} {t_nb:10.4f} {t_np / t_nb:7.1f}x")


if __name__ == "__main__":
    main()
