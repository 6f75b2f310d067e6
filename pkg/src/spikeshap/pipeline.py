"""Stage-wise pipeline: ingest, detect, features, train, explain, cluster,
report.

Every stage is a pure function from its input files (under ``<out>/work``)
to its output files, so stages can be run one at a time and a finished run
can resume: the state file records a fingerprint of the effective config and
the input data, and a stage whose fingerprint matches and whose outputs
exist is skipped. Nothing in any output depends on wall-clock time or
filesystem iteration order, so rerunning a pipeline from scratch reproduces
every file byte for byte.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
from dataclasses import dataclass

import numpy as np

from . import cluster as clustering
from . import forest as forests
from .config import (
    CLUSTER_SEED_OFFSET,
    FOREST_SEED_OFFSET,
    SPLIT_SEED_OFFSET,
    dump_config,
    validate_config,
)
from .detect import (
    Segment,
    SpikeEvent,
    ThresholdSpec,
    detect_points,
    event_statistics,
    EventStats,
    group_events,
    resolve_thresholds,
    segment as segment_series,
)
from .drivers import DriverReport, aggregate, attribute
from .errors import ConfigError, TooFewRowsError
from .features import Dataset, build_dataset, load_dataset, save_dataset
from .market import DriverCategory, fill_gaps, load_csv, load_schema, write_csv, write_schema
from .report import ReportInputs, render_report
from .shapley import ForestExplainer

log = logging.getLogger("spikeshap.pipeline")

STAGE_OUTPUTS = {
    "ingest": ("work/series.csv", "work/schema.yaml"),
    "detect": ("work/thresholds.json", "work/events.csv", "work/event_stats.json"),
    "features": ("work/segments.csv", "work/dataset.csv"),
    "train": ("work/split.json", "work/model.json", "work/metrics.json"),
    "explain": ("work/explanations.csv", "work/driver_reports.csv"),
    "cluster": ("work/clusters.json",),
    "report": (
        "report/summary.txt",
        "report/events.csv",
        "report/drivers.csv",
        "report/drivers_by_season_daytime.csv",
        "report/clusters.csv",
        "report/effective_config.yaml",
    ),
}
STAGES = tuple(STAGE_OUTPUTS)


@dataclass(frozen=True)
class Paths:
    out: str

    @property
    def work_dir(self) -> str:
        return os.path.join(self.out, "work")

    @property
    def report_dir(self) -> str:
        return os.path.join(self.out, "report")

    def work(self, name: str) -> str:
        return os.path.join(self.work_dir, name)

    def report(self, name: str) -> str:
        return os.path.join(self.report_dir, name)

    def state(self) -> str:
        return os.path.join(self.work_dir, "state.json")


def _save_json(path: str, doc) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def _load_json(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _digest_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def fingerprint(cfg: dict) -> str:
    h = hashlib.sha256()
    h.update(dump_config(cfg).encode("utf-8"))
    for key in ("csv", "schema"):
        path = cfg["input"][key]
        if path and os.path.exists(path):
            h.update(_digest_file(path).encode("ascii"))
    return h.hexdigest()


def _load_state(paths: Paths) -> dict:
    if os.path.exists(paths.state()):
        try:
            return _load_json(paths.state())
        except (json.JSONDecodeError, OSError):
            return {"stages": {}}
    return {"stages": {}}


def _mark_stage(paths: Paths, state: dict, name: str, fp: str) -> None:
    state.setdefault("stages", {})[name] = fp
    _save_json(paths.state(), state)


def _load_work_series(paths: Paths):
    schema = load_schema(paths.work("schema.yaml"))
    return load_csv(paths.work("series.csv"), schema)


def stage_ingest(cfg: dict, paths: Paths) -> None:
    schema = load_schema(cfg["input"]["schema"])
    series = load_csv(cfg["input"]["csv"], schema)
    series = fill_gaps(series, cfg["fill"]["policy"])
    os.makedirs(paths.work_dir, exist_ok=True)
    write_csv(series, paths.work("series.csv"))
    write_schema(series.channels, paths.work("schema.yaml"))
    log.info("ingest: %d intervals, %d channels", series.n_steps, len(series.channels))


def stage_detect(cfg: dict, paths: Paths) -> None:
    series = _load_work_series(paths)
    spec = ThresholdSpec(
        mode=cfg["threshold"]["mode"],
        moderate=cfg["threshold"]["moderate"],
        high=cfg["threshold"]["high"],
    )
    moderate, high = resolve_thresholds(series, spec)
    points = detect_points(series, high)
    events = group_events(points, series.prices, max_gap=cfg["group"]["max_gap"])
    stats = event_statistics(events, series, cfg["tz_offset"])
    _save_json(
        paths.work("thresholds.json"),
        {"mode": spec.mode, "moderate": moderate, "high": high},
    )
    with open(paths.work("events.csv"), "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["event_id", "t_first", "t_last", "start_ts", "end_ts",
             "duration_intervals", "peak_value"]
        )
        for i, ev in enumerate(events):
            writer.writerow(
                [
                    f"ev{i:04d}",
                    ev.t_first,
                    ev.t_last,
                    series.timestamp_at(ev.t_first).isoformat(),
                    series.timestamp_at(ev.t_last).isoformat(),
                    ev.duration_intervals,
                    repr(float(ev.peak_value)),
                ]
            )
    _save_json(
        paths.work("event_stats.json"),
        {
            "n_events": stats.n_events,
            "by_season": stats.by_season,
            "by_daytime": stats.by_daytime,
            "duration_histogram": {str(k): v for k, v in stats.duration_histogram.items()},
            "frac_longer_than_hour": stats.frac_longer_than_hour,
        },
    )
    log.info("detect: %d spike points, %d events", points.size, len(events))


def _load_events(paths: Paths, series) -> list[SpikeEvent]:
    thresholds = _load_json(paths.work("thresholds.json"))
    points = detect_points(series, thresholds["high"])
    events = []
    with open(paths.work("events.csv"), "r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            t_first = int(row["t_first"])
            t_last = int(row["t_last"])
            inside = points[(points >= t_first) & (points <= t_last)]
            events.append(
                SpikeEvent(
                    t_first=t_first,
                    t_last=t_last,
                    point_indices=tuple(int(p) for p in inside),
                    peak_value=float(row["peak_value"]),
                )
            )
    return events


def _load_event_stats(paths: Paths) -> EventStats:
    doc = _load_json(paths.work("event_stats.json"))
    return EventStats(
        n_events=doc["n_events"],
        by_season=doc["by_season"],
        by_daytime=doc["by_daytime"],
        duration_histogram={int(k): v for k, v in doc["duration_histogram"].items()},
        frac_longer_than_hour=doc["frac_longer_than_hour"],
    )


def stage_features(cfg: dict, paths: Paths) -> None:
    series = _load_work_series(paths)
    events = _load_events(paths, series)
    segments = segment_series(
        series, events, b_len=cfg["segment"]["b_len"], f_len=cfg["segment"]["f_len"]
    )
    dataset = build_dataset(segments, series, include=cfg["features"]["include"])
    with open(paths.work("segments.csv"), "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["segment_id", "label", "start", "end", "event_id"])
        for i, seg in enumerate(dataset.segments):
            writer.writerow(
                [
                    f"seg{i:05d}",
                    seg.label,
                    seg.start,
                    seg.end,
                    f"ev{seg.event_index:04d}" if seg.event_index is not None else "",
                ]
            )
    save_dataset(dataset, paths.work("dataset.csv"))
    n0, n1 = dataset.class_counts()
    log.info("features: %d segments (%d anomalous, %d normal)", dataset.n_rows, n1, n0)


def _load_segments(paths: Paths) -> list[Segment]:
    segments = []
    with open(paths.work("segments.csv"), "r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            segments.append(
                Segment(
                    label=row["label"],
                    start=int(row["start"]),
                    end=int(row["end"]),
                    event_index=int(row["event_id"][2:]) if row["event_id"] else None,
                )
            )
    return segments


def stage_train(cfg: dict, paths: Paths) -> None:
    dataset = load_dataset(paths.work("dataset.csv"))
    seed = cfg["seed"]
    mask = forests.train_test_mask(
        dataset, ratio=cfg["split"]["ratio"], seed=seed + SPLIT_SEED_OFFSET
    )
    train_ds = Dataset(
        X=dataset.X[mask], y=dataset.y[mask], feature_names=dataset.feature_names
    )
    test_ds = Dataset(
        X=dataset.X[~mask], y=dataset.y[~mask], feature_names=dataset.feature_names
    )
    hp = forests.Hyperparams(
        n_trees=cfg["forest"]["n_trees"],
        max_depth=cfg["forest"]["max_depth"],
        min_samples_leaf=cfg["forest"]["min_samples_leaf"],
        mtry=cfg["forest"]["mtry"],
        class_weighting=cfg["forest"]["class_weighting"],
        seed=seed + FOREST_SEED_OFFSET,
    )
    model = forests.train(train_ds, hp)
    metrics = forests.evaluate(model, test_ds, cfg["forest"]["decision_threshold"])
    forests.save(model, paths.work("model.json"))
    _save_json(
        paths.work("split.json"),
        {
            "ratio": cfg["split"]["ratio"],
            "seed": seed + SPLIT_SEED_OFFSET,
            "train_rows": np.nonzero(mask)[0].tolist(),
            "test_rows": np.nonzero(~mask)[0].tolist(),
        },
    )
    doc = metrics.to_dict()
    doc["decision_threshold"] = cfg["forest"]["decision_threshold"]
    _save_json(paths.work("metrics.json"), doc)
    log.info(
        "train: accuracy %.3f recall %.3f fpr %.3f on %d held-out rows",
        metrics.accuracy,
        metrics.recall,
        metrics.false_positive_rate,
        test_ds.n_rows,
    )


def stage_explain(cfg: dict, paths: Paths) -> None:
    series = _load_work_series(paths)
    dataset = load_dataset(paths.work("dataset.csv"))
    segments = _load_segments(paths)
    model = forests.load(paths.work("model.json"))
    anomalous_rows = np.nonzero(dataset.y == 1)[0]
    explainer = ForestExplainer(model)
    reports: list[tuple[int, DriverReport]] = []
    with open(paths.work("explanations.csv"), "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["segment_id", "base_value", "prediction"]
            + [f"phi__{name}" for name in dataset.feature_names]
        )
        if anomalous_rows.size:
            explanations = explainer.explain(dataset.X[anomalous_rows])
            for row, exp in zip(anomalous_rows, explanations):
                writer.writerow(
                    [f"seg{row:05d}", repr(exp.base_value), repr(exp.prediction)]
                    + [repr(float(p)) for p in exp.phi]
                )
                rep = attribute(
                    exp,
                    series,
                    segments[row],
                    tz_offset=cfg["tz_offset"],
                    k=cfg["explain"]["top_k"],
                    min_phi=cfg["explain"]["min_phi"],
                )
                reports.append((int(row), rep))
    with open(paths.work("driver_reports.csv"), "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["segment_id", "start", "end", "season", "daytime", "drivers", "top_features"]
        )
        for row, rep in reports:
            writer.writerow(
                [
                    f"seg{row:05d}",
                    rep.segment.start,
                    rep.segment.end,
                    rep.season,
                    rep.daytime,
                    "|".join(sorted(c.value for c in rep.drivers)),
                    ";".join(
                        f"{name}:{cat}:{repr(phi)}" for name, cat, phi in rep.top_features
                    ),
                ]
            )
    log.info("explain: %d anomalous segments explained", len(reports))


def _load_driver_reports(paths: Paths) -> list[DriverReport]:
    reports = []
    with open(paths.work("driver_reports.csv"), "r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            top = []
            if row["top_features"]:
                for item in row["top_features"].split(";"):
                    name, cat, phi = item.rsplit(":", 2)
                    top.append((name, cat, float(phi)))
            drivers = frozenset(
                DriverCategory(v) for v in row["drivers"].split("|") if v
            )
            reports.append(
                DriverReport(
                    segment=Segment("anomalous", int(row["start"]), int(row["end"])),
                    drivers=drivers,
                    top_features=tuple(top),
                    season=row["season"],
                    daytime=row["daytime"],
                )
            )
    return reports


def stage_cluster(cfg: dict, paths: Paths) -> None:
    dataset = load_dataset(paths.work("dataset.csv"))
    rows = (
        np.nonzero(dataset.y == 1)[0]
        if cfg["cluster"]["anomalous_only"]
        else np.arange(dataset.n_rows)
    )
    X = dataset.X[rows]
    seed = cfg["seed"] + CLUSTER_SEED_OFFSET
    elbow_doc = None
    k = cfg["cluster"]["k"]
    if k is None:
        result = clustering.elbow(
            X,
            k_min=cfg["cluster"]["k_min"],
            k_max=cfg["cluster"]["k_max"],
            seed=seed,
            n_restarts=cfg["cluster"]["n_restarts"],
            feature_names=tuple(dataset.feature_names),
        )
        k = result.suggested_k
        elbow_doc = {
            "k_values": list(result.k_values),
            "inertias": list(result.inertias),
            "suggested_k": result.suggested_k,
        }
    if X.shape[0] < k:
        raise TooFewRowsError(f"{X.shape[0]} rows cannot form {k} clusters")
    model = clustering.fit(
        X,
        k,
        seed=seed,
        max_iter=cfg["cluster"]["max_iter"],
        tol=cfg["cluster"]["tol"],
        n_restarts=cfg["cluster"]["n_restarts"],
        feature_names=tuple(dataset.feature_names),
    )
    _save_json(
        paths.work("clusters.json"),
        {
            "k": model.k,
            "feature_names": list(model.feature_names),
            "dropped": list(model.dropped),
            "rows": rows.tolist(),
            "assignments": model.assignments.tolist(),
            "inertia": model.inertia,
            "centroids_std": [[float(v) for v in row] for row in model.centroids],
            "feature_means": [float(v) for v in model.feature_means],
            "feature_stds": [float(v) for v in model.feature_stds],
            "elbow": elbow_doc,
        },
    )
    log.info("cluster: k=%d inertia=%.4f over %d rows", model.k, model.inertia, X.shape[0])


def _load_cluster_model(paths: Paths) -> clustering.ClusterModel:
    doc = _load_json(paths.work("clusters.json"))
    return clustering.ClusterModel(
        k=doc["k"],
        centroids=np.asarray(doc["centroids_std"], dtype=np.float64),
        feature_names=tuple(doc["feature_names"]),
        feature_means=np.asarray(doc["feature_means"], dtype=np.float64),
        feature_stds=np.asarray(doc["feature_stds"], dtype=np.float64),
        dropped=tuple(doc["dropped"]),
        assignments=np.asarray(doc["assignments"], dtype=np.int64),
        inertia=float(doc["inertia"]),
    )


def stage_report(cfg: dict, paths: Paths) -> None:
    series = _load_work_series(paths)
    events = _load_events(paths, series)
    stats = _load_event_stats(paths)
    summary = aggregate(_load_driver_reports(paths))
    model = _load_cluster_model(paths)
    metrics = _load_json(paths.work("metrics.json"))
    thresholds = _load_json(paths.work("thresholds.json"))
    inputs = ReportInputs(
        series=series,
        events=events,
        stats=stats,
        driver_summary=summary,
        cluster_model=model,
        metrics=metrics,
        thresholds=thresholds,
    )
    os.makedirs(paths.report_dir, exist_ok=True)
    render_report(inputs, paths.report_dir)
    with open(paths.report("effective_config.yaml"), "w", encoding="utf-8", newline="") as fh:
        fh.write(dump_config(cfg))
    log.info("report: written to %s", paths.report_dir)


_STAGE_FNS = {
    "ingest": stage_ingest,
    "detect": stage_detect,
    "features": stage_features,
    "train": stage_train,
    "explain": stage_explain,
    "cluster": stage_cluster,
    "report": stage_report,
}


def run_stage(name: str, cfg: dict, paths: Paths) -> None:
    if name not in _STAGE_FNS:
        raise ConfigError(f"unknown stage {name!r}")
    os.makedirs(paths.work_dir, exist_ok=True)
    _STAGE_FNS[name](cfg, paths)


def run_pipeline(cfg: dict, resume: bool = False) -> dict[str, str]:
    """Run all stages in order; returns {stage: "ran"|"skipped"}."""
    validate_config(cfg)
    paths = Paths(cfg["output"]["dir"])
    os.makedirs(paths.work_dir, exist_ok=True)
    fp = fingerprint(cfg)
    state = _load_state(paths) if resume else {"stages": {}}
    outcome = {}
    for name in STAGES:
        outputs_exist = all(
            os.path.exists(os.path.join(paths.out, rel)) for rel in STAGE_OUTPUTS[name]
        )
        if resume and state.get("stages", {}).get(name) == fp and outputs_exist:
            outcome[name] = "skipped"
            log.info("stage %s: up to date", name)
            continue
        log.info("stage %s: running", name)
        run_stage(name, cfg, paths)
        _mark_stage(paths, state, name, fp)
        outcome[name] = "ran"
    return outcome


@dataclass(frozen=True)
class FalsePositiveRow:
    segment_id: str
    start: int
    end: int
    mean_price: float
    above_moderate: bool


@dataclass(frozen=True)
class FalsePositiveAudit:
    rows: tuple[FalsePositiveRow, ...]
    mean_price: float | None  # mean of per-segment means; None without FPs
    frac_above_moderate: float | None


def false_positive_audit(
    forest_model,
    dataset: Dataset,
    segments: list[Segment],
    test_rows: list[int],
    series,
    moderate_value: float,
    decision_threshold: float = 0.5,
) -> FalsePositiveAudit:
    """Inspect held-out normal segments the classifier flagged as spikes.

    For each false positive: the mean price over its window and whether any
    price in the window exceeds the moderate threshold, which marks the alarm
    as an elevated-price near miss rather than noise.
    """
    rows = []
    idx = np.asarray(test_rows, dtype=np.int64)
    if idx.size:
        pred = forests.classify(
            forest_model, dataset.X[idx], threshold=decision_threshold
        )
        prices = series.prices
        for row, p in zip(idx, pred):
            if int(p) == 1 and int(dataset.y[row]) == 0:
                seg = segments[int(row)]
                window = prices[seg.start : seg.end + 1]
                rows.append(
                    FalsePositiveRow(
                        segment_id=f"seg{int(row):05d}",
                        start=seg.start,
                        end=seg.end,
                        mean_price=float(window.mean()),
                        above_moderate=bool((window > moderate_value).any()),
                    )
                )
    if rows:
        mean_price = float(np.mean([r.mean_price for r in rows]))
        frac = float(np.mean([1.0 if r.above_moderate else 0.0 for r in rows]))
    else:
        mean_price = None
        frac = None
    return FalsePositiveAudit(rows=tuple(rows), mean_price=mean_price, frac_above_moderate=frac)


def run_audit(cfg: dict, paths: Paths) -> FalsePositiveAudit:
    series = _load_work_series(paths)
    dataset = load_dataset(paths.work("dataset.csv"))
    segments = _load_segments(paths)
    model = forests.load(paths.work("model.json"))
    split = _load_json(paths.work("split.json"))
    thresholds = _load_json(paths.work("thresholds.json"))
    audit = false_positive_audit(
        model,
        dataset,
        segments,
        split["test_rows"],
        series,
        thresholds["moderate"],
        cfg["forest"]["decision_threshold"],
    )
    with open(paths.work("fp_audit.csv"), "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["segment_id", "start", "end", "mean_price", "above_moderate"])
        for row in audit.rows:
            writer.writerow(
                [
                    row.segment_id,
                    row.start,
                    row.end,
                    repr(row.mean_price),
                    str(row.above_moderate).lower(),
                ]
            )
    return audit
