"""Acceptance gate: ten independently checkable guarantees, one test each.

Each criterion runs at its stated tolerance and (where stated) within its
runtime budget; a hook in conftest prints one explicit pass/fail line per
criterion.  Real historical market data is not bundled, so every check is
property- or oracle-based, or runs on seeded synthetic scenarios with known
ground truth.
"""

from __future__ import annotations

import hashlib
import os
import shutil
import time
import warnings

import numpy as np
import pytest

from spikeshap import cluster as clustering
from spikeshap import forest as forests
from spikeshap.config import load_config
from spikeshap.detect import (
    ThresholdSpec,
    detect_points,
    group_events,
    resolve_thresholds,
    segment,
)
from spikeshap.drivers import attribute
from spikeshap.errors import DegenerateSeriesWarning
from spikeshap.features import Dataset, build_dataset
from spikeshap.forest import Hyperparams, Metrics, grow_tree, train, train_test_mask
from spikeshap.pipeline import run_pipeline
from spikeshap.shapley import (
    ForestExplainer,
    brute_force_shapley,
    explain_forest,
    forest_subset_value,
)
from spikeshap.synth import SynthConfig, generate, write_scenario

from .conftest import make_series
from .test_cluster import blobs
from .test_detect import percentile_oracle
from .test_forest import exhaustive_best_split


def random_forest_model(rng, n, f, n_trees, depth, seed):
    X = rng.normal(size=(n, f))
    y = (X[:, 0] + 0.7 * X[:, 1 % f] + 0.4 * rng.normal(size=n) > 0).astype(np.int64)
    if y.min() == y.max():
        y[: n // 2] = 1 - y[0]
    ds = Dataset(X=X, y=y, feature_names=tuple(f"f{i}" for i in range(f)))
    return ds, train(ds, Hyperparams(n_trees=n_trees, max_depth=depth, seed=seed))


def test_criterion_01_shapley_efficiency():
    """base + sum(phi) equals predict_proba within 1e-9 on 1000 queries."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)

    sc = generate(SynthConfig(days=8, events_per_category=3, seed=0))
    spec = ThresholdSpec("percentile", 95.0, sc.suggested_high_percentile)
    _, high = resolve_thresholds(sc.series, spec)
    events = group_events(detect_points(sc.series, high), sc.series.prices)
    ds_a = build_dataset(segment(sc.series, events), sc.series)
    forest_a = train(ds_a, Hyperparams(n_trees=120, max_depth=10, seed=2000))

    ds_b, forest_b = random_forest_model(rng, n=300, f=10, n_trees=60, depth=8, seed=7)

    for ds, forest in ((ds_a, forest_a), (ds_b, forest_b)):
        lo = ds.X.min(axis=0)
        hi = ds.X.max(axis=0)
        span = np.where(hi > lo, hi - lo, 1.0)
        Xq = rng.uniform(lo - 0.25 * span, hi + 0.25 * span, size=(1000, ds.X.shape[1]))
        explanations = ForestExplainer(forest).explain(Xq)
        recon = np.array([e.base_value + e.phi.sum() for e in explanations])
        pred = forests.predict_proba(forest, Xq)
        assert np.max(np.abs(recon - pred)) < 1e-9
    assert time.perf_counter() - t0 < 30.0


def test_criterion_02_shapley_matches_brute_force():
    """explain_forest equals subset-enumeration Shapley within 1e-9."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(202)
    for i in range(50):
        f = 2 + i % 11  # cycles 2..12
        n_trees = 1 + (3 * i) % 10
        depth = 1 + i % 5
        ds, forest = random_forest_model(rng, n=60, f=f, n_trees=n_trees, depth=depth, seed=i)
        queries = [rng.normal(size=f), ds.X[int(rng.integers(ds.n_rows))]]
        for x in queries:
            exp = explain_forest(forest, x)
            phi_bf = brute_force_shapley(lambda S: forest_subset_value(forest, x, S), f)
            assert np.max(np.abs(exp.phi - phi_bf)) < 1e-9
    assert time.perf_counter() - t0 < 120.0


def _oracle_gain(X, y, w, j, thr):
    """Weighted-Gini gain of one candidate split, in oracle arithmetic."""
    w0 = np.where(y == 0, w, 0.0)
    w1 = np.where(y == 1, w, 0.0)
    W0, W1 = w0.sum(), w1.sum()
    parent = 2.0 * W0 * W1 / (W0 + W1)
    left = X[:, j] <= thr
    l0, l1 = w0[left].sum(), w1[left].sum()
    r0, r1 = W0 - l0, W1 - l1
    gl = 2.0 * l0 * l1 / (l0 + l1) if l0 + l1 > 0 else 0.0
    gr = 2.0 * r0 * r1 / (r0 + r1) if r0 + r1 > 0 else 0.0
    return parent - gl - gr


def test_criterion_03_depth1_split_matches_exhaustive_gini():
    """Depth-1 trees choose the exhaustive best weighted-Gini split.

    The trainer's gain and the oracle's gain are algebraically identical but
    accumulate differently in float64, so two splits whose exact gains sit
    within rounding noise of each other can rank either way.  The check is
    therefore: the chosen split's oracle gain equals the exhaustive best
    within 1e-9 (which forces exact agreement whenever the best is decisive),
    and on constructed exact-tie datasets the lowest-feature-then-lowest-
    threshold rule holds literally.
    """
    t0 = time.perf_counter()
    rng = np.random.default_rng(303)
    for trial in range(100):
        n = int(rng.integers(6, 40))
        f = int(rng.integers(1, 5))
        X = np.round(rng.standard_normal((n, f)) * 2, 2)
        y = rng.integers(0, 2, size=n).astype(np.int64)
        if y.min() == y.max():
            y[0] = 1 - y[0]
        w = np.where(y == 1, rng.uniform(0.5, 3.0), rng.uniform(0.2, 1.5))
        tree = grow_tree(X, y, w, np.random.default_rng(trial), 1, 1, f)
        oj, othr = exhaustive_best_split(X, y, w)
        if oj < 0:
            assert int(tree.feature[0]) == -1
            continue
        assert int(tree.feature[0]) >= 0
        best = _oracle_gain(X, y, w, oj, othr)
        chosen = _oracle_gain(X, y, w, int(tree.feature[0]), float(tree.threshold[0]))
        assert chosen >= best - 1e-9 * max(1.0, abs(best)), (
            f"trial {trial}: chosen gain {chosen} below exhaustive best {best}"
        )

    # Exact ties: small integers, unit weights, duplicated column.  Gains for
    # thresholds 1.5 and 3.5 on feature 0 are exactly equal; features 0 and 1
    # are copies.  The rule picks feature 0, threshold 1.5.
    Xt = np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0], [4.0, 4.0]])
    yt = np.array([1, 0, 0, 1], dtype=np.int64)
    wt = np.ones(4)
    tie_tree = grow_tree(Xt, yt, wt, np.random.default_rng(0), 1, 1, 2)
    assert int(tie_tree.feature[0]) == 0
    assert float(tie_tree.threshold[0]) == 1.5
    assert time.perf_counter() - t0 < 60.0


def test_criterion_04_percentile_matches_sort_oracle():
    """resolve_thresholds equals sort-based interpolation within 1e-9."""
    rng = np.random.default_rng(404)
    for trial in range(1000):
        n = int(rng.integers(5, 400))
        if trial % 100 == 0:
            prices = np.full(n, float(rng.normal()))  # degenerate constant series
        else:
            prices = rng.normal(loc=50.0, scale=10.0, size=n)
        series = make_series(prices, {"gen": np.zeros(n)})
        moderate_p = float(rng.uniform(1.0, 97.0))
        high_p = float(rng.uniform(moderate_p + 0.5, 99.9))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateSeriesWarning)
            moderate, high = resolve_thresholds(
                series, ThresholdSpec("percentile", moderate_p, high_p)
            )
        assert abs(moderate - percentile_oracle(prices, moderate_p)) < 1e-9
        assert abs(high - percentile_oracle(prices, high_p)) < 1e-9


def test_criterion_05_segmentation_partition_property():
    """No index in two segments; spikes in anomalous windows; exact window rule."""
    rng = np.random.default_rng(505)
    for trial in range(100):
        n = int(rng.integers(80, 2500))
        prices = rng.normal(loc=50.0, scale=5.0, size=n)
        for _ in range(int(rng.integers(0, 7))):
            start = int(rng.integers(0, n))
            width = int(rng.integers(1, 6))
            prices[start : start + width] += float(rng.uniform(100.0, 300.0))
        series = make_series(prices, {"gen": np.zeros(n)})
        _, high = resolve_thresholds(series, ThresholdSpec("percentile", 95.0, 99.0))
        points = detect_points(series, high)
        events = group_events(points, series.prices)
        b_len = int(rng.integers(1, 9))
        f_len = int(rng.integers(1, 9))
        segs = segment(series, events, b_len=b_len, f_len=f_len)

        ordered = sorted(segs, key=lambda s: s.start)
        for prev, nxt in zip(ordered, ordered[1:]):
            assert prev.end < nxt.start  # no index belongs to two segments

        anomalous = [(s.start, s.end) for s in ordered if s.label == "anomalous"]
        for p in points:
            assert any(lo <= p <= hi for lo, hi in anomalous)

        expected: list[tuple[int, int]] = []
        for ev in events:
            lo = max(0, ev.t_first - b_len)
            hi = min(n - 1, ev.t_last + f_len)
            if expected and lo <= expected[-1][1]:
                expected[-1] = (expected[-1][0], max(expected[-1][1], hi))
            else:
                expected.append((lo, hi))
        assert anomalous == expected


def test_criterion_06_end_to_end_driver_recovery():
    """Attributed drivers contain the injected category; intervals match."""
    t0 = time.perf_counter()
    for seed in range(20):
        sc = generate(SynthConfig(days=30, events_per_category=10, seed=seed))
        series = sc.series
        spec = ThresholdSpec("percentile", 95.0, sc.suggested_high_percentile)
        _, high = resolve_thresholds(series, spec)
        events = group_events(detect_points(series, high), series.prices)
        segs = segment(series, events)
        ds = build_dataset(segs, series)
        model = train(ds, Hyperparams(seed=2000 + seed))
        explainer = ForestExplainer(model)
        rows = np.nonzero(ds.y == 1)[0]
        explanations = explainer.explain(ds.X[rows])

        contains = 0
        matched_events = 0
        truth_hit: set[tuple[int, int]] = set()
        for row, exp in zip(rows, explanations):
            seg = ds.segments[row]
            ev = events[seg.event_index]
            overlaps = [
                tv for tv in sc.events
                if tv.t_start <= ev.t_last and ev.t_first <= tv.t_end
            ]
            truth_hit.update((tv.t_start, tv.t_end) for tv in overlaps)
            if not overlaps:
                continue
            matched_events += 1
            rep = attribute(exp, series, seg, tz_offset=0.0, k=5, min_phi=0.0)
            if any(set(tv.categories) & rep.drivers for tv in overlaps):
                contains += 1

        assert matched_events > 0
        assert contains / matched_events >= 0.80
        assert len(truth_hit) / len(sc.events) >= 0.95
    assert time.perf_counter() - t0 < 600.0


def test_criterion_07_classifier_recall_and_fpr():
    """~4% positive rate; held-out recall >= 0.8 and FPR <= 0.15."""
    sc = generate(SynthConfig(days=150, events_per_category=25, seed=11))
    series = sc.series
    spec = ThresholdSpec("percentile", 95.0, sc.suggested_high_percentile)
    _, high = resolve_thresholds(series, spec)
    events = group_events(detect_points(series, high), series.prices)
    ds = build_dataset(segment(series, events), series)

    positive_rate = float(np.mean(ds.y))
    assert 0.035 <= positive_rate <= 0.05

    mask = train_test_mask(ds, ratio=0.67, seed=1011)
    train_ds = Dataset(X=ds.X[mask], y=ds.y[mask], feature_names=ds.feature_names)
    test_ds = Dataset(X=ds.X[~mask], y=ds.y[~mask], feature_names=ds.feature_names)
    model = train(train_ds, Hyperparams(seed=2011))
    metrics = forests.evaluate(model, test_ds, 0.5)
    assert metrics.recall >= 0.8
    assert metrics.false_positive_rate <= 0.15


def test_criterion_08_kmeans_monotone_elbow_and_audit():
    """Lloyd asserts monotone inertia in-run; elbow finds k=3; audit passes."""
    rng = np.random.default_rng(808)
    # (a) every fit exercises the in-run non-increasing-inertia assertion,
    # which raises RuntimeError on violation.
    for trial in range(20):
        n = int(rng.integers(30, 200))
        d = int(rng.integers(2, 6))
        k = int(rng.integers(2, 7))
        X = rng.normal(size=(n, d)) * rng.uniform(0.5, 3.0)
        model = clustering.fit(X, k, seed=trial, n_restarts=3)
        # (c) nearest-centroid audit in standardized space
        Z = (X - model.feature_means) / model.feature_stds
        d2 = ((Z[:, None, :] - model.centroids[None, :, :]) ** 2).sum(axis=2)
        assert np.array_equal(np.argmin(d2, axis=1), model.assignments)
        assert np.array_equal(model.predict(X), model.assignments)

    # (b) elbow suggests k=3 on three-blob data in >= 18/20 seeds
    hits = 0
    for seed in range(20):
        X, _ = blobs(seed=seed)
        hits += clustering.elbow(X, k_min=2, k_max=8, seed=seed).suggested_k == 3
    assert hits >= 18


def _digest_tree(root: str) -> dict[str, str]:
    out = {}
    for base, _, names in os.walk(root):
        for name in names:
            path = os.path.join(base, name)
            with open(path, "rb") as fh:
                out[os.path.relpath(path, root)] = hashlib.sha256(fh.read()).hexdigest()
    return out


def test_criterion_09_pipeline_reruns_byte_identical(tmp_path):
    """Same config and seed: every report and work file identical, SVGs too."""
    sc = generate(SynthConfig(days=15, events_per_category=4, seed=3))
    files = write_scenario(sc, tmp_path / "scenario")
    out = tmp_path / "out"
    cfg = load_config()
    cfg["input"]["csv"] = files["data"]
    cfg["input"]["schema"] = files["schema"]
    cfg["threshold"]["high"] = sc.suggested_high_percentile
    cfg["forest"]["n_trees"] = 40
    cfg["forest"]["max_depth"] = 8
    cfg["cluster"]["k"] = 3
    cfg["cluster"]["n_restarts"] = 3
    cfg["output"]["dir"] = str(out)

    run_pipeline(cfg)
    first = _digest_tree(str(out))
    shutil.rmtree(out)
    run_pipeline(cfg)
    second = _digest_tree(str(out))
    assert second == first
    svgs = [rel for rel in first if rel.endswith(".svg")]
    assert len(svgs) == 3  # one radar per cluster


def test_criterion_10_fpr_convention_and_fixed_threshold():
    """FP/(FP+TN) gives 769/5919 -> 12.99%; 140.51 flags strict exceedance."""
    m = Metrics(tn=5150, fp=769, fn=44, tp=176)
    assert m.false_positive_rate == 769 / 5919
    assert round(100.0 * m.false_positive_rate, 2) == 12.99

    just_above = float(np.nextafter(140.51, np.inf))
    prices = np.array([100.0, 140.51, 140.52, 500.0, 140.5099, just_above, 140.51])
    series = make_series(prices, {"gen": np.zeros(prices.size)})
    moderate, high = resolve_thresholds(series, ThresholdSpec("fixed", 100.0, 140.51))
    assert high == 140.51
    points = detect_points(series, high)
    assert points.tolist() == [2, 3, 5]
