"""Report rendering: radar charts and the output directory.

Everything here is a pure function of its inputs: no timestamps, no
environment lookups, fixed float formatting. Rendering the same artifacts
twice yields byte-identical files, SVGs included. Charts are emitted as
hand-built SVG rather than through a plotting library for exactly that
reason.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .cluster import ClusterModel
from .detect import DAYTIMES, SEASONS, EventStats, SpikeEvent
from .drivers import DriverSummary
from .errors import TooFewAxesError
from .features import split_feature_name
from .market import CATEGORY_LABELS, DriverCategory, MarketSeries

STAT_SYMBOLS = {
    "mean": "μ",  # mu
    "std": "σ",  # sigma
    "avg_grad": "δ̄",  # delta with macron
    "max_grad": "δmax",
}

_SIZE = 440.0
_CENTER = 220.0
_RADIUS = 150.0
_RING_FRACTIONS = (0.25, 0.5, 0.75, 1.0)
RADIAL_FLOOR = 0.1


def axis_label(feature: str) -> str:
    channel, stat = split_feature_name(feature)
    return f"{channel} {STAT_SYMBOLS[stat]}"


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _vertex(frac: float, i: int, m: int) -> tuple[float, float]:
    # axis 0 points straight up; axes advance clockwise
    theta = math.pi / 2 - 2.0 * math.pi * i / m
    x = _CENTER + _RADIUS * frac * math.cos(theta)
    y = _CENTER - _RADIUS * frac * math.sin(theta)
    return x, y


def _polygon_points(fractions) -> str:
    m = len(fractions)
    return " ".join(
        f"{_fmt(x)},{_fmt(y)}"
        for x, y in (_vertex(f, i, m) for i, f in enumerate(fractions))
    )


def radar_chart(labels, fractions, title: str = "") -> str:
    """Render one radar chart.

    ``fractions`` are radial positions in [0, 1], one per axis; use
    ``scale_axes`` to derive them from raw values. Needs at least three axes
    to enclose an area.
    """
    labels = list(labels)
    fracs = [float(f) for f in fractions]
    m = len(labels)
    if m < 3:
        raise TooFewAxesError(f"radar chart needs >= 3 axes, got {m}")
    if m != len(fracs):
        raise ValueError("labels and fractions disagree in length")
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SIZE:.0f}" '
        f'height="{_SIZE:.0f}" viewBox="0 0 {_SIZE:.0f} {_SIZE:.0f}">',
        f'<rect width="{_SIZE:.0f}" height="{_SIZE:.0f}" fill="white"/>',
    ]
    if title:
        parts.append(
            f'<text x="{_fmt(_CENTER)}" y="24" text-anchor="middle" '
            f'font-family="sans-serif" font-size="16">{title}</text>'
        )
    for ring in _RING_FRACTIONS:
        pts = _polygon_points([ring] * m)
        parts.append(
            f'<polygon points="{pts}" fill="none" stroke="#cccccc" stroke-width="1"/>'
        )
    for i, label in enumerate(labels):
        x, y = _vertex(1.0, i, m)
        parts.append(
            f'<line x1="{_fmt(_CENTER)}" y1="{_fmt(_CENTER)}" x2="{_fmt(x)}" '
            f'y2="{_fmt(y)}" stroke="#cccccc" stroke-width="1"/>'
        )
        lx, ly = _vertex(1.13, i, m)
        parts.append(
            f'<text x="{_fmt(lx)}" y="{_fmt(ly)}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{label}</text>'
        )
    pts = _polygon_points(fracs)
    parts.append(
        f'<polygon points="{pts}" fill="#4477aa" fill-opacity="0.35" '
        f'stroke="#4477aa" stroke-width="2"/>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def scale_axes(values: np.ndarray, lows: np.ndarray, highs: np.ndarray) -> list[float]:
    """Min-max scale axis values into [RADIAL_FLOOR, 1]; a degenerate axis
    (low == high) sits at the middle of that band."""
    out = []
    for v, lo, hi in zip(values, lows, highs):
        t = (float(v) - float(lo)) / (float(hi) - float(lo)) if hi > lo else 0.5
        out.append(RADIAL_FLOOR + (1.0 - RADIAL_FLOOR) * t)
    return out


def cluster_radars(model: ClusterModel, m: int = 8) -> dict[int, str]:
    """One radar chart per cluster.

    Each chart shows the cluster's m most distinctive axes (largest absolute
    standardized centroid value, ties to the earlier feature), drawn in
    feature order. Radial scale is per axis across all centroids, so charts
    are comparable.
    """
    d = model.centroids.shape[1]
    if d < 3:
        raise TooFewAxesError(f"only {d} usable features; radar needs >= 3 axes")
    m_eff = min(m, d)
    lows = model.centroids.min(axis=0)
    highs = model.centroids.max(axis=0)
    charts = {}
    for c in range(model.k):
        z = model.centroids[c]
        order = np.argsort(-np.abs(z), kind="stable")[:m_eff]
        axes = np.sort(order)
        labels = [axis_label(model.feature_names[int(j)]) for j in axes]
        fractions = scale_axes(z[axes], lows[axes], highs[axes])
        charts[c] = radar_chart(labels, fractions, title=f"cluster {c}")
    return charts


@dataclass(frozen=True)
class ReportInputs:
    """Everything render_report needs, bundled to keep call sites tidy."""

    series: MarketSeries
    events: list[SpikeEvent]
    stats: EventStats
    driver_summary: DriverSummary
    cluster_model: ClusterModel | None
    metrics: dict | None = None
    thresholds: dict | None = None


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _events_csv(series: MarketSeries, events: list[SpikeEvent]) -> str:
    lines = ["event_id,start_ts,end_ts,duration_intervals,peak_value"]
    for i, ev in enumerate(events):
        lines.append(
            ",".join(
                [
                    f"ev{i:04d}",
                    series.timestamp_at(ev.t_first).isoformat(),
                    series.timestamp_at(ev.t_last).isoformat(),
                    str(ev.duration_intervals),
                    repr(float(ev.peak_value)),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def _drivers_csv(summary: DriverSummary) -> str:
    lines = ["category,segments,share_pct"]
    for cat in DriverCategory:
        lines.append(
            ",".join(
                [
                    CATEGORY_LABELS[cat],
                    str(summary.category_counts[cat]),
                    f"{summary.category_pct[cat]:.2f}",
                ]
            )
        )
    return "\n".join(lines) + "\n"


def _drivers_buckets_csv(summary: DriverSummary) -> str:
    lines = ["category,season,daytime,segments"]
    for cat in DriverCategory:
        for season in SEASONS:
            for daytime in DAYTIMES:
                lines.append(
                    ",".join(
                        [
                            CATEGORY_LABELS[cat],
                            season,
                            daytime,
                            str(summary.by_season_daytime[cat][(season, daytime)]),
                        ]
                    )
                )
    return "\n".join(lines) + "\n"


def _clusters_csv(model: ClusterModel | None) -> str:
    if model is None:
        return "cluster,n_segments\n"
    header = ["cluster", "n_segments"] + list(model.feature_names)
    lines = [",".join(header)]
    raw = model.raw_centroids()
    sizes = model.sizes
    for c in range(model.k):
        row = [str(c), str(int(sizes[c]))]
        row += [repr(float(v)) for v in raw[c]]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def _summary_txt(inputs: ReportInputs) -> str:
    st = inputs.stats
    ds = inputs.driver_summary
    lines = [
        "report-format: 1",
        f"series: {inputs.series.n_steps} intervals x {len(inputs.series.channels)} channels "
        f"from {inputs.series.start.isoformat()}",
        f"events: {st.n_events}",
        f"events longer than one hour: {st.frac_longer_than_hour * 100.0:.2f}%",
    ]
    if inputs.thresholds:
        lines.append(
            "thresholds: moderate="
            + repr(float(inputs.thresholds["moderate"]))
            + " high="
            + repr(float(inputs.thresholds["high"]))
        )
    lines.append("events by season: " + ", ".join(f"{s}={st.by_season[s]}" for s in SEASONS))
    lines.append(
        "events by daytime: " + ", ".join(f"{d}={st.by_daytime[d]}" for d in DAYTIMES)
    )
    lines.append(
        f"attributed segments: {ds.n_segments - ds.n_unattributed}/{ds.n_segments}"
        f" (unattributed {ds.n_unattributed})"
    )
    for cat in DriverCategory:
        lines.append(
            f"driver {CATEGORY_LABELS[cat]}: {ds.category_counts[cat]} segments"
            f" ({ds.category_pct[cat]:.2f}%)"
        )
        channels = ds.channel_counts[cat]
        if channels:
            lines.append(
                "  channels: "
                + ", ".join(f"{name}={count}" for name, count in channels.items())
            )
    if inputs.metrics:
        m = inputs.metrics
        lines.append(
            "classifier: accuracy={:.4f} recall={:.4f} precision={:.4f} fpr={:.4f}".format(
                m["accuracy"], m["recall"], m["precision"], m["false_positive_rate"]
            )
        )
        lines.append(
            "confusion: tn={tn} fp={fp} fn={fn} tp={tp}".format(
                tn=m["tn"], fp=m["fp"], fn=m["fn"], tp=m["tp"]
            )
        )
    if inputs.cluster_model is not None:
        cm = inputs.cluster_model
        sizes = ",".join(str(int(s)) for s in cm.sizes)
        lines.append(f"clusters: k={cm.k} sizes=[{sizes}] inertia={cm.inertia!r}")
        if cm.dropped:
            lines.append("dropped features: " + ", ".join(cm.dropped))
    return "\n".join(lines) + "\n"


def render_report(inputs: ReportInputs, out_dir) -> list[str]:
    """Write the report directory; returns the file names written.

    Contents: events.csv, drivers.csv, drivers_by_season_daytime.csv,
    clusters.csv, one radar_cluster_NN.svg per cluster, summary.txt.
    """
    os.makedirs(out_dir, exist_ok=True)
    written = []

    def emit(name: str, text: str):
        _write(os.path.join(out_dir, name), text)
        written.append(name)

    emit("events.csv", _events_csv(inputs.series, inputs.events))
    emit("drivers.csv", _drivers_csv(inputs.driver_summary))
    emit("drivers_by_season_daytime.csv", _drivers_buckets_csv(inputs.driver_summary))
    emit("clusters.csv", _clusters_csv(inputs.cluster_model))
    if inputs.cluster_model is not None and inputs.cluster_model.centroids.shape[1] >= 3:
        for c, svg in cluster_radars(inputs.cluster_model).items():
            emit(f"radar_cluster_{c:02d}.svg", svg)
    emit("summary.txt", _summary_txt(inputs))
    return written
