"""Binary random-forest classifier built from scratch.

Trees are grown greedily on weighted Gini impurity with midpoint thresholds
between consecutive distinct feature values. Class imbalance is handled twice
over: bootstraps are stratified per class, and rows carry weights inverse to
their class frequency. Leaves store the weighted positive fraction, and the
forest predicts the mean of the per-tree leaf values.

Determinism contract: training canonicalizes row order (a content sort
followed by one seeded shuffle) before drawing any bootstrap index, so
permuting the rows of the training set changes nothing. Each tree consumes
its own RNG stream seeded with ``seed + tree_index``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import (
    CorruptModelFileError,
    DimensionMismatchError,
    InvalidHyperparamsError,
    MalformedTreeError,
    SingleClassDatasetError,
    VersionMismatchError,
)
from .features import Dataset

MODEL_FORMAT = "spikeshap-forest"
MODEL_VERSION = 1


@dataclass(frozen=True)
class Hyperparams:
    n_trees: int = 200
    max_depth: int = 12
    min_samples_leaf: int = 2
    mtry: int | None = None  # None: ceil(sqrt(n_features))
    class_weighting: bool = True
    seed: int = 0

    def validate(self, n_features: int) -> None:
        if self.n_trees < 1:
            raise InvalidHyperparamsError("n_trees must be >= 1")
        if self.max_depth < 1:
            raise InvalidHyperparamsError("max_depth must be >= 1")
        if self.min_samples_leaf < 1:
            raise InvalidHyperparamsError("min_samples_leaf must be >= 1")
        if self.mtry is not None and not (1 <= self.mtry <= n_features):
            raise InvalidHyperparamsError(
                f"mtry must be in [1, {n_features}], got {self.mtry}"
            )

    def resolved_mtry(self, n_features: int) -> int:
        if self.mtry is not None:
            return self.mtry
        return max(1, math.ceil(math.sqrt(n_features)))


@dataclass
class Tree:
    """One decision tree as flat arrays; children index -1 marks a leaf."""

    children_left: np.ndarray  # int32
    children_right: np.ndarray  # int32
    feature: np.ndarray  # int32, -1 at leaves
    threshold: np.ndarray  # float64, 0.0 at leaves
    n_samples: np.ndarray  # int64 training rows reaching each node
    leaf_value: np.ndarray  # float64 weighted positive fraction

    @property
    def n_nodes(self) -> int:
        return self.children_left.shape[0]


def validate_tree(tree: Tree, n_features: int) -> None:
    """Structural check: a rooted binary tree where every node is reached
    exactly once, splits have both children, and leaf values are in [0, 1]."""
    n = tree.n_nodes
    if n == 0:
        raise MalformedTreeError("tree has no nodes")
    arrays = (
        tree.children_left,
        tree.children_right,
        tree.feature,
        tree.threshold,
        tree.n_samples,
        tree.leaf_value,
    )
    if any(a.shape != (n,) for a in arrays):
        raise MalformedTreeError("tree arrays have inconsistent lengths")
    seen = np.zeros(n, dtype=bool)
    stack = [0]
    while stack:
        i = stack.pop()
        if i < 0 or i >= n:
            raise MalformedTreeError(f"child index {i} out of range")
        if seen[i]:
            raise MalformedTreeError(f"node {i} reached twice (cycle or shared child)")
        seen[i] = True
        f = int(tree.feature[i])
        left, right = int(tree.children_left[i]), int(tree.children_right[i])
        if f < 0:
            if left != -1 or right != -1:
                raise MalformedTreeError(f"leaf {i} has children")
            v = float(tree.leaf_value[i])
            if not (0.0 <= v <= 1.0) or math.isnan(v):
                raise MalformedTreeError(f"leaf {i} value {v} outside [0, 1]")
        else:
            if f >= n_features:
                raise MalformedTreeError(f"node {i} splits on unknown feature {f}")
            if left == -1 or right == -1:
                raise MalformedTreeError(f"split node {i} is missing a child")
            if tree.n_samples[i] != tree.n_samples[left] + tree.n_samples[right]:
                raise MalformedTreeError(f"node {i} sample counts do not add up")
            stack.append(right)
            stack.append(left)
    if not seen.all():
        raise MalformedTreeError("unreachable nodes present")


@dataclass
class Forest:
    trees: list[Tree]
    n_features: int
    feature_names: tuple[str, ...]
    hyperparams: Hyperparams
    base_rate: float  # positive fraction of the training rows

    def __post_init__(self):
        self._explainer_cache = None


def grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    w: np.ndarray,
    rng: np.random.Generator,
    max_depth: int,
    min_samples_leaf: int,
    mtry: int,
) -> Tree:
    """Grow one tree on the given rows (callers handle bootstrapping).

    Candidate features are drawn per node without replacement and scanned in
    ascending index order, so gain ties resolve to the lowest feature index
    and then the lowest threshold.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y8 = np.ascontiguousarray(y, dtype=np.int8)
    w = np.ascontiguousarray(w, dtype=np.float64)
    n, n_features = X.shape

    children_left: list[int] = []
    children_right: list[int] = []
    feature: list[int] = []
    threshold: list[float] = []
    n_samples: list[int] = []
    leaf_value: list[float] = []

    def new_node(rows: np.ndarray) -> int:
        wr = w[rows]
        wsum = float(wr.sum())
        w1 = float(wr[y8[rows] == 1].sum())
        children_left.append(-1)
        children_right.append(-1)
        feature.append(-1)
        threshold.append(0.0)
        n_samples.append(int(rows.size))
        leaf_value.append(w1 / wsum)
        return len(feature) - 1

    def build(rows: np.ndarray, depth: int) -> int:
        node = new_node(rows)
        if depth >= max_depth or rows.size < 2 * min_samples_leaf:
            return node
        ys = y8[rows]
        if ys.min() == ys.max():
            return node
        m = min(mtry, n_features)
        cand = np.sort(rng.choice(n_features, size=m, replace=False))
        Xsub = np.ascontiguousarray(X[np.ix_(rows, cand)])
        j, thr, gain = kernels.best_split(Xsub, ys, w[rows], min_samples_leaf)
        if j < 0:
            return node
        gf = int(cand[j])
        feature[node] = gf
        threshold[node] = float(thr)
        go_left = X[rows, gf] <= thr
        children_left[node] = build(rows[go_left], depth + 1)
        children_right[node] = build(rows[~go_left], depth + 1)
        return node

    build(np.arange(n, dtype=np.int64), 0)
    return Tree(
        children_left=np.asarray(children_left, dtype=np.int32),
        children_right=np.asarray(children_right, dtype=np.int32),
        feature=np.asarray(feature, dtype=np.int32),
        threshold=np.asarray(threshold, dtype=np.float64),
        n_samples=np.asarray(n_samples, dtype=np.int64),
        leaf_value=np.asarray(leaf_value, dtype=np.float64),
    )


def _canonical_order(X: np.ndarray, y: np.ndarray, seed: int) -> np.ndarray:
    """Content-sorted row order with one seeded shuffle on top.

    Because the sort depends only on row contents, the result (and therefore
    every bootstrap draw) is invariant to the order rows arrived in.
    """
    keys = tuple(X[:, j] for j in range(X.shape[1] - 1, -1, -1))
    canon = np.lexsort((y,) + keys)
    perm = np.random.default_rng(seed).permutation(X.shape[0])
    return canon[perm]


def class_weights(y: np.ndarray, enabled: bool) -> dict[int, float]:
    """Inverse-frequency weights normalized so both classes carry equal mass:
    w_c = n / (2 * n_c). Disabled gives unit weights."""
    if not enabled:
        return {0: 1.0, 1: 1.0}
    n = y.shape[0]
    out = {}
    for c in (0, 1):
        n_c = int(np.sum(y == c))
        out[c] = n / (2.0 * n_c) if n_c else 0.0
    return out


def train(dataset: Dataset, hyperparams: Hyperparams | None = None) -> Forest:
    """Fit a forest; fully deterministic given the dataset contents and seed."""
    hp = hyperparams or Hyperparams()
    X = np.ascontiguousarray(dataset.X, dtype=np.float64)
    y = np.asarray(dataset.y, dtype=np.int64)
    n, n_features = X.shape
    hp.validate(n_features)
    counts = {c: int(np.sum(y == c)) for c in (0, 1)}
    if counts[0] == 0 or counts[1] == 0:
        raise SingleClassDatasetError("training data must contain both classes")

    order = _canonical_order(X, y, hp.seed)
    Xc, yc = X[order], y[order]
    weights = class_weights(yc, hp.class_weighting)
    w = np.array([weights[int(c)] for c in yc], dtype=np.float64)
    pos = {c: np.nonzero(yc == c)[0] for c in (0, 1)}
    mtry = hp.resolved_mtry(n_features)

    trees = []
    for t in range(hp.n_trees):
        rng = np.random.default_rng(hp.seed + t)
        parts = []
        for c in (0, 1):
            idx = pos[c]
            draw = rng.integers(0, idx.size, size=idx.size)
            parts.append(idx[draw])
        rows = np.concatenate(parts)
        trees.append(
            grow_tree(
                Xc[rows],
                yc[rows],
                w[rows],
                rng,
                max_depth=hp.max_depth,
                min_samples_leaf=hp.min_samples_leaf,
                mtry=mtry,
            )
        )
    return Forest(
        trees=trees,
        n_features=n_features,
        feature_names=tuple(dataset.feature_names),
        hyperparams=hp,
        base_rate=counts[1] / n,
    )


def predict_proba(forest: Forest, X) -> float | np.ndarray:
    """Mean leaf value over trees; scalar for a single vector."""
    arr = np.asarray(X, dtype=np.float64)
    single = arr.ndim == 1
    X2 = np.ascontiguousarray(np.atleast_2d(arr))
    if X2.shape[1] != forest.n_features:
        raise DimensionMismatchError(
            f"expected {forest.n_features} features, got {X2.shape[1]}"
        )
    acc = np.zeros(X2.shape[0], dtype=np.float64)
    for tree in forest.trees:
        acc += kernels.tree_predict(
            tree.children_left,
            tree.children_right,
            tree.feature,
            tree.threshold,
            tree.leaf_value,
            X2,
        )
    out = acc / len(forest.trees)
    return float(out[0]) if single else out


def classify(forest: Forest, X, threshold: float = 0.5) -> np.ndarray:
    proba = np.atleast_1d(predict_proba(forest, X))
    return (proba >= threshold).astype(np.int64)


@dataclass(frozen=True)
class Metrics:
    tn: int
    fp: int
    fn: int
    tp: int
    accuracy: float = field(init=False)
    precision: float = field(init=False)
    recall: float = field(init=False)
    false_positive_rate: float = field(init=False)

    def __post_init__(self):
        total = self.tn + self.fp + self.fn + self.tp
        object.__setattr__(
            self, "accuracy", (self.tp + self.tn) / total if total else 0.0
        )
        ppos = self.tp + self.fp
        object.__setattr__(self, "precision", self.tp / ppos if ppos else 0.0)
        apos = self.tp + self.fn
        object.__setattr__(self, "recall", self.tp / apos if apos else 0.0)
        aneg = self.fp + self.tn
        object.__setattr__(
            self, "false_positive_rate", self.fp / aneg if aneg else 0.0
        )

    def to_dict(self) -> dict:
        return {
            "tn": self.tn,
            "fp": self.fp,
            "fn": self.fn,
            "tp": self.tp,
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "false_positive_rate": self.false_positive_rate,
        }


def metrics_from_counts(tn: int, fp: int, fn: int, tp: int) -> Metrics:
    return Metrics(tn=tn, fp=fp, fn=fn, tp=tp)


def evaluate(forest: Forest, dataset: Dataset, threshold: float = 0.5) -> Metrics:
    pred = classify(forest, dataset.X, threshold)
    y = dataset.y
    tp = int(np.sum((pred == 1) & (y == 1)))
    tn = int(np.sum((pred == 0) & (y == 0)))
    fp = int(np.sum((pred == 1) & (y == 0)))
    fn = int(np.sum((pred == 0) & (y == 1)))
    return metrics_from_counts(tn, fp, fn, tp)


def train_test_mask(dataset: Dataset, ratio: float = 0.67, seed: int = 0) -> np.ndarray:
    """Boolean row mask (True = train) for a stratified split.

    Each class contributes round(ratio * n_c) rows to the train side, clamped
    so both sides keep at least one row of any class that has two or more.
    """
    if not (0.0 < ratio < 1.0):
        raise InvalidHyperparamsError("split ratio must be in (0, 1)")
    y = dataset.y
    order = _canonical_order(dataset.X, y, seed)
    train_rows: list[int] = []
    for c in (0, 1):
        members = order[y[order] == c]
        n_c = members.size
        if n_c == 0:
            continue
        take = int(round(ratio * n_c))
        if n_c >= 2:
            take = min(max(take, 1), n_c - 1)
        else:
            take = 1
        train_rows.extend(int(i) for i in members[:take])
    mask = np.zeros(dataset.n_rows, dtype=bool)
    mask[train_rows] = True
    return mask


def split_train_test(
    dataset: Dataset, ratio: float = 0.67, seed: int = 0
) -> tuple[Dataset, Dataset]:
    """Stratified split into (train, test) datasets; row order within each
    split stays chronological."""
    mask = train_test_mask(dataset, ratio, seed)

    def _subset(m: np.ndarray) -> Dataset:
        segs = (
            tuple(s for s, keep in zip(dataset.segments, m) if keep)
            if dataset.segments is not None
            else None
        )
        return Dataset(
            X=dataset.X[m],
            y=dataset.y[m],
            feature_names=dataset.feature_names,
            segments=segs,
        )

    return _subset(mask), _subset(~mask)


def save(forest: Forest, path) -> None:
    """Serialize to versioned JSON. Floats are written with full precision,
    so a load followed by predict reproduces training-time outputs exactly."""
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "n_features": forest.n_features,
        "feature_names": list(forest.feature_names),
        "base_rate": float(forest.base_rate),
        "hyperparams": {
            "n_trees": forest.hyperparams.n_trees,
            "max_depth": forest.hyperparams.max_depth,
            "min_samples_leaf": forest.hyperparams.min_samples_leaf,
            "mtry": forest.hyperparams.mtry,
            "class_weighting": forest.hyperparams.class_weighting,
            "seed": forest.hyperparams.seed,
        },
        "trees": [
            {
                "children_left": tree.children_left.tolist(),
                "children_right": tree.children_right.tolist(),
                "feature": tree.feature.tolist(),
                "threshold": [float(v) for v in tree.threshold],
                "n_samples": tree.n_samples.tolist(),
                "leaf_value": [float(v) for v in tree.leaf_value],
            }
            for tree in forest.trees
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, separators=(",", ":"), sort_keys=True)
        fh.write("\n")


def load(path) -> Forest:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CorruptModelFileError(f"cannot read model file {path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise VersionMismatchError(f"{path} is not a {MODEL_FORMAT} file")
    if doc.get("version") != MODEL_VERSION:
        raise VersionMismatchError(
            f"model version {doc.get('version')} unsupported (expected {MODEL_VERSION})"
        )
    try:
        hp = Hyperparams(**doc["hyperparams"])
        n_features = int(doc["n_features"])
        trees = []
        for td in doc["trees"]:
            trees.append(
                Tree(
                    children_left=np.asarray(td["children_left"], dtype=np.int32),
                    children_right=np.asarray(td["children_right"], dtype=np.int32),
                    feature=np.asarray(td["feature"], dtype=np.int32),
                    threshold=np.asarray(td["threshold"], dtype=np.float64),
                    n_samples=np.asarray(td["n_samples"], dtype=np.int64),
                    leaf_value=np.asarray(td["leaf_value"], dtype=np.float64),
                )
            )
        forest = Forest(
            trees=trees,
            n_features=n_features,
            feature_names=tuple(doc["feature_names"]),
            hyperparams=hp,
            base_rate=float(doc["base_rate"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptModelFileError(f"model file {path} is malformed: {exc}") from exc
    if not forest.trees:
        raise CorruptModelFileError(f"model file {path} contains no trees")
    for tree in forest.trees:
        try:
            validate_tree(tree, n_features)
        except MalformedTreeError as exc:
            raise CorruptModelFileError(f"model file {path}: {exc}") from exc
    return forest
