#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-numpy fallback.

Runs each of the four kernels on identical inputs through both backends,
reports best-of-N wall times and the speedup, and cross-checks that the
outputs agree.  The first compiled call includes JIT compilation, so every
kernel is warmed up once before timing.

Usage:
    python3 benchmarks/bench_kernels.py [--repeats N] [--quick]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from spikeshap.features import Dataset
from spikeshap.forest import Hyperparams, grow_tree, train
from spikeshap.kernels import numba_backend as nbk
from spikeshap.kernels import numpy_backend as npk
from spikeshap.shapley import _build_leaf_table, shapley_weight_table


def best_of(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def row(name: str, size: str, t_nb: float, t_np: float) -> None:
    speedup = t_np / t_nb if t_nb > 0 else float("inf")
    print(f"{name:<14} {size:<26} {t_nb * 1e3:>10.2f} {t_np * 1e3:>10.2f} {speedup:>8.1f}x")


def bench_tree_predict(rng, repeats: int, quick: bool) -> None:
    n_queries = 20_000 if quick else 200_000
    X = rng.normal(size=(4000, 12))
    y = (X[:, 0] + 0.5 * X[:, 1] > 0).astype(np.int64)
    tree = grow_tree(X, y, np.ones(len(y)), rng, 12, 2, 12)
    Xq = np.ascontiguousarray(rng.normal(size=(n_queries, 12)))
    args = (tree.children_left, tree.children_right, tree.feature,
            tree.threshold, tree.leaf_value)
    nbk.tree_predict(*args, Xq[:10])  # JIT warmup
    t_nb = best_of(lambda: nbk.tree_predict(*args, Xq), repeats)
    t_np = best_of(lambda: npk.tree_predict(*args, Xq), repeats)
    assert np.array_equal(nbk.tree_predict(*args, Xq), npk.tree_predict(*args, Xq))
    row("tree_predict", f"depth-12 tree, {n_queries} q", t_nb, t_np)


def bench_best_split(rng, repeats: int, quick: bool) -> None:
    n = 2000 if quick else 20_000
    X = np.ascontiguousarray(rng.normal(size=(n, 8)))
    y = (X[:, 0] > 0).astype(np.int8)
    w = rng.uniform(0.5, 2.0, size=n)
    nbk.best_split(X[:64], y[:64], w[:64], 2)  # JIT warmup
    t_nb = best_of(lambda: nbk.best_split(X, y, w, 2), repeats)
    t_np = best_of(lambda: npk.best_split(X, y, w, 2), repeats)
    j_nb, thr_nb, _ = nbk.best_split(X, y, w, 2)
    j_np, thr_np, _ = npk.best_split(X, y, w, 2)
    assert (j_nb, thr_nb) == (j_np, thr_np)
    row("best_split", f"{n} rows x 8 features", t_nb, t_np)


def bench_tree_phi(rng, repeats: int, quick: bool) -> None:
    n_queries = 500 if quick else 5000
    f = 12
    X = rng.normal(size=(800, f))
    y = (X[:, 0] + 0.5 * X[:, 1] > 0).astype(np.int64)
    ds = Dataset(X=X, y=y, feature_names=tuple(f"f{i}" for i in range(f)))
    forest = train(ds, Hyperparams(n_trees=20, max_depth=8, seed=0))
    tables = [_build_leaf_table(t) for t in forest.trees]
    wtab = shapley_weight_table(max(max(t.max_d for t in tables), 1))
    Xq = np.ascontiguousarray(rng.normal(size=(n_queries, f)))

    def run(backend):
        phi = np.zeros((n_queries, f), dtype=np.float64)
        for tab in tables:
            backend.tree_phi(tab.leaf_off, tab.feat, tab.r, tab.lo, tab.hi,
                             tab.leaf_value, wtab, Xq, phi)
        return phi

    run(nbk)  # JIT warmup
    t_nb = best_of(lambda: run(nbk), repeats)
    t_np = best_of(lambda: run(npk), repeats)
    assert np.array_equal(run(nbk), run(npk))
    row("tree_phi", f"20 trees, {n_queries} queries", t_nb, t_np)


def bench_assign_points(rng, repeats: int, quick: bool) -> None:
    n = 20_000 if quick else 200_000
    X = np.ascontiguousarray(rng.normal(size=(n, 16)))
    C = np.ascontiguousarray(rng.normal(size=(12, 16)))
    nbk.assign_points(X[:64], C)  # JIT warmup
    t_nb = best_of(lambda: nbk.assign_points(X, C), repeats)
    t_np = best_of(lambda: npk.assign_points(X, C), repeats)
    a_nb, i_nb = nbk.assign_points(X, C)
    a_np, i_np = npk.assign_points(X, C)
    assert np.array_equal(a_nb, a_np) and abs(i_nb - i_np) <= 1e-9 * i_nb
    row("assign_points", f"{n} points, k=12, d=16", t_nb, t_np)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5,
                        help="take the best of N timed runs (default 5)")
    parser.add_argument("--quick", action="store_true",
                        help="smaller problem sizes for a fast smoke run")
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    print(f"{'kernel':<14} {'size':<26} {'numba ms':>10} {'numpy ms':>10} {'speedup':>9}")
    bench_tree_predict(rng, args.repeats, args.quick)
    bench_best_split(rng, args.repeats, args.quick)
    bench_tree_phi(rng, args.repeats, args.quick)
    bench_assign_points(rng, args.repeats, args.quick)


if __name__ == "__main__":
    main()
