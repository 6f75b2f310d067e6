"""Exact Shapley attributions for forest predictions.

The value function behind the attributions is the tree-conditional
expectation: to evaluate a feature subset S at query x, route normally at
nodes splitting on a feature in S, and at every other node descend both
children weighted by their training-sample share. phi_j is the exact Shapley
value of feature j in that game, so base_value (the empty-subset value) plus
the phi sum equals the model prediction to float precision.

``explain_tree``/``explain_forest`` compute this in closed form per leaf: the
leaf's subset weight factorizes over the distinct features on its path, one
indicator-or-fraction factor each, and the Shapley sum of such a product game
falls out of one polynomial built from the factors and divided by each in
turn. ``brute_force_shapley`` is the independent cross-check that enumerates
every subset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from . import kernels
from .detect import Segment
from .errors import DimensionMismatchError, TooManyFeaturesError
from .forest import Forest, Tree, predict_proba, validate_tree

MAX_BRUTE_FORCE_FEATURES = 20


@dataclass(frozen=True)
class Explanation:
    """Additive attribution of one prediction: prediction ~= base_value + sum(phi)."""

    base_value: float
    phi: np.ndarray
    prediction: float
    feature_names: tuple[str, ...] | None = None
    segment: Segment | None = None


@dataclass
class _LeafTable:
    """Per-leaf factors of one tree, flattened for the kernels.

    Factors for leaf l occupy [leaf_off[l], leaf_off[l+1]); each carries the
    feature index, the product of sample fractions r, and the interval
    (lo, hi] the query must hit for the indicator to be 1. ``base`` is the
    empty-subset value sum(leaf_value * prod(r)).
    """

    leaf_off: np.ndarray
    feat: np.ndarray
    r: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    leaf_value: np.ndarray
    base: float
    max_d: int


def _build_leaf_table(tree: Tree) -> _LeafTable:
    offs = [0]
    feats: list[int] = []
    rs: list[float] = []
    los: list[float] = []
    his: list[float] = []
    vals: list[float] = []
    base = 0.0
    max_d = 0

    def walk(node: int, factors: dict[int, list[float]]):
        nonlocal base, max_d
        f = int(tree.feature[node])
        if f < 0:
            items = sorted(factors.items())
            prod_r = 1.0
            for fid, (r, lo, hi) in items:
                feats.append(fid)
                rs.append(r)
                los.append(lo)
                his.append(hi)
                prod_r *= r
            offs.append(len(feats))
            v = float(tree.leaf_value[node])
            vals.append(v)
            base += v * prod_r
            max_d = max(max_d, len(items))
            return
        thr = float(tree.threshold[node])
        left = int(tree.children_left[node])
        right = int(tree.children_right[node])
        nn = float(tree.n_samples[node])
        for child, is_left in ((left, True), (right, False)):
            frac = float(tree.n_samples[child]) / nn
            prev = factors.get(f)
            saved = list(prev) if prev is not None else None
            if prev is None:
                prev = [1.0, -math.inf, math.inf]
                factors[f] = prev
            prev[0] *= frac
            if is_left:
                prev[2] = min(prev[2], thr)
            else:
                prev[1] = max(prev[1], thr)
            walk(child, factors)
            if saved is None:
                del factors[f]
            else:
                factors[f] = saved

    walk(0, {})
    return _LeafTable(
        leaf_off=np.asarray(offs, dtype=np.int64),
        feat=np.asarray(feats, dtype=np.int64),
        r=np.asarray(rs, dtype=np.float64),
        lo=np.asarray(los, dtype=np.float64),
        hi=np.asarray(his, dtype=np.float64),
        leaf_value=np.asarray(vals, dtype=np.float64),
        base=base,
        max_d=max_d,
    )


def shapley_weight_table(max_d: int) -> np.ndarray:
    """wtab[d, k] = k! (d-1-k)! / d! for 0 <= k < d."""
    wtab = np.zeros((max_d + 1, max_d + 1), dtype=np.float64)
    for d in range(1, max_d + 1):
        fd = math.factorial(d)
        for k in range(d):
            wtab[d, k] = math.factorial(k) * math.factorial(d - 1 - k) / fd
    return wtab


class ForestExplainer:
    """Precomputed explainer; build once, explain many queries."""

    def __init__(self, forest: Forest):
        for tree in forest.trees:
            validate_tree(tree, forest.n_features)
        self.forest = forest
        self.tables = [_build_leaf_table(t) for t in forest.trees]
        max_d = max((t.max_d for t in self.tables), default=0)
        self.wtab = shapley_weight_table(max(max_d, 1))
        self.base_value = float(
            sum(t.base for t in self.tables) / len(self.tables)
        )

    def phi(self, X) -> tuple[np.ndarray, float]:
        """Raw attributions for a batch: (queries x features) plus base."""
        arr = np.asarray(X, dtype=np.float64)
        X2 = np.ascontiguousarray(np.atleast_2d(arr))
        if X2.shape[1] != self.forest.n_features:
            raise DimensionMismatchError(
                f"expected {self.forest.n_features} features, got {X2.shape[1]}"
            )
        acc = np.zeros((X2.shape[0], self.forest.n_features), dtype=np.float64)
        for table in self.tables:
            kernels.tree_phi(
                table.leaf_off,
                table.feat,
                table.r,
                table.lo,
                table.hi,
                table.leaf_value,
                self.wtab,
                X2,
                acc,
            )
        return acc / len(self.tables), self.base_value

    def explain(self, X, segments=None) -> list[Explanation]:
        arr = np.asarray(X, dtype=np.float64)
        X2 = np.atleast_2d(arr)
        phi, base = self.phi(X2)
        preds = np.atleast_1d(predict_proba(self.forest, X2))
        if segments is None:
            segments = [None] * X2.shape[0]
        return [
            Explanation(
                base_value=base,
                phi=phi[i],
                prediction=float(preds[i]),
                feature_names=self.forest.feature_names,
                segment=segments[i],
            )
            for i in range(X2.shape[0])
        ]


def explain_tree(tree: Tree, x, n_features: int) -> tuple[np.ndarray, float]:
    """Attributions of a single tree for a single query."""
    validate_tree(tree, n_features)
    table = _build_leaf_table(tree)
    x2 = np.ascontiguousarray(np.atleast_2d(np.asarray(x, dtype=np.float64)))
    if x2.shape[1] != n_features:
        raise DimensionMismatchError(f"expected {n_features} features, got {x2.shape[1]}")
    phi = np.zeros((1, n_features), dtype=np.float64)
    kernels.tree_phi(
        table.leaf_off,
        table.feat,
        table.r,
        table.lo,
        table.hi,
        table.leaf_value,
        shapley_weight_table(max(table.max_d, 1)),
        x2,
        phi,
    )
    return phi[0], table.base


def explain_forest(forest: Forest, X, segments=None):
    """Explain one query (vector) or a batch (matrix).

    Reuses a cached explainer on the forest, so repeated calls only pay the
    leaf-table precomputation once.
    """
    if forest._explainer_cache is None:
        forest._explainer_cache = ForestExplainer(forest)
    explainer = forest._explainer_cache
    single = np.asarray(X).ndim == 1
    out = explainer.explain(X, segments=None if single else segments)
    if single:
        exp = out[0]
        if segments is not None:
            exp = Explanation(
                base_value=exp.base_value,
                phi=exp.phi,
                prediction=exp.prediction,
                feature_names=exp.feature_names,
                segment=segments,
            )
        return exp
    return out


def tree_subset_value(tree: Tree, x, subset) -> float:
    """Conditional expectation of one tree given only the features in subset."""
    x = np.asarray(x, dtype=np.float64)
    members = frozenset(int(f) for f in subset)

    def rec(node: int) -> float:
        f = int(tree.feature[node])
        if f < 0:
            return float(tree.leaf_value[node])
        left = int(tree.children_left[node])
        right = int(tree.children_right[node])
        if f in members:
            child = left if x[f] <= float(tree.threshold[node]) else right
            return rec(child)
        nn = float(tree.n_samples[node])
        wl = float(tree.n_samples[left]) / nn
        wr = float(tree.n_samples[right]) / nn
        return wl * rec(left) + wr * rec(right)

    return rec(0)


def forest_subset_value(forest: Forest, x, subset) -> float:
    return sum(tree_subset_value(t, x, subset) for t in forest.trees) / len(
        forest.trees
    )


def brute_force_shapley(value_fn, n_features: int) -> np.ndarray:
    """Exact Shapley values by full subset enumeration.

    ``value_fn`` maps a frozenset of feature indices to a real value (bind
    the query and model in a closure; see ``forest_subset_value``). Memoizes
    the 2^n subset values, so the limit is n_features <= 20.
    """
    if n_features > MAX_BRUTE_FORCE_FEATURES:
        raise TooManyFeaturesError(
            f"subset enumeration over {n_features} features is intractable"
        )
    cache: dict[frozenset, float] = {}

    def v(subset: frozenset) -> float:
        got = cache.get(subset)
        if got is None:
            got = float(value_fn(subset))
            cache[subset] = got
        return got

    fact = [math.factorial(s) for s in range(n_features + 1)]
    weights = [
        fact[s] * fact[n_features - 1 - s] / fact[n_features]
        for s in range(n_features)
    ]
    phi = np.zeros(n_features, dtype=np.float64)
    for i in range(n_features):
        others = [f for f in range(n_features) if f != i]
        total = 0.0
        for size in range(n_features):
            wgt = weights[size]
            for combo in combinations(others, size):
                s = frozenset(combo)
                total += wgt * (v(s | {i}) - v(s))
        phi[i] = total
    return phi


def rank_drivers(explanation: Explanation, k: int = 5) -> list[tuple[str, float]]:
    """Top-k positive attributions as (feature_name, phi).

    Only features pushing the prediction toward the spike class qualify;
    ties sort by feature name.
    """
    if explanation.feature_names is None:
        raise ValueError("explanation carries no feature names")
    pairs = [
        (name, float(p))
        for name, p in zip(explanation.feature_names, explanation.phi)
        if p > 0.0
    ]
    pairs.sort(key=lambda t: (-t[1], t[0]))
    return pairs[:k]
