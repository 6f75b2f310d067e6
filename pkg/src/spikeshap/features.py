"""Per-segment state vectors.

Every non-price channel contributes four derived features over a segment:
mean, sample standard deviation, average gradient and maximum gradient (the
first difference with the largest magnitude, sign preserved). Channels with
hourly cadence carry no sub-hour structure, so they contribute the mean only.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .detect import Segment
from .errors import (
    DataError,
    MissingDataError,
    SegmentTooShortError,
    SingleClassDatasetError,
)
from .market import MarketSeries

STAT_NAMES = ("mean", "std", "avg_grad", "max_grad")
SEP = "__"


def feature_name(channel: str, stat: str) -> str:
    return f"{channel}{SEP}{stat}"


def split_feature_name(name: str) -> tuple[str, str]:
    channel, _, stat = name.rpartition(SEP)
    if not channel or stat not in STAT_NAMES:
        raise ValueError(f"not a derived feature name: {name!r}")
    return channel, stat


def channel_stats(window: np.ndarray) -> dict[str, float]:
    """The four summary statistics of one channel over one window.

    The average gradient telescopes to (last - first) / (n - 1); the maximum
    gradient keeps its sign and, on magnitude ties, the earliest difference.
    """
    if window.size < 2:
        raise SegmentTooShortError("need at least two intervals")
    diffs = np.diff(window)
    k = int(np.argmax(np.abs(diffs)))
    return {
        "mean": float(np.mean(window)),
        "std": float(np.std(window, ddof=1)),
        "avg_grad": float(np.mean(diffs)),
        "max_grad": float(diffs[k]),
    }


@dataclass(frozen=True)
class StateVector:
    segment: Segment
    names: tuple[str, ...]
    values: np.ndarray
    label: int

    @property
    def features(self) -> list[tuple[str, float]]:
        return list(zip(self.names, (float(v) for v in self.values)))


def _included_channels(series: MarketSeries, include) -> list[int]:
    if include is None:
        return [
            j for j, c in enumerate(series.channels) if not c.is_price_signal
        ]
    wanted = list(include)
    known = {c.name for c in series.channels}
    for name in wanted:
        if name not in known:
            raise DataError(f"unknown channel {name!r} in feature include list")
    return [
        j
        for j, c in enumerate(series.channels)
        if not c.is_price_signal and c.name in wanted
    ]


def summarize(
    seg: Segment,
    series: MarketSeries,
    include: list[str] | None = None,
) -> StateVector:
    """Build the state vector of one segment.

    ``include`` restricts the channels (None means all non-price channels).
    The price channel never contributes features. Missing values inside the
    window are an error; fill gaps first.
    """
    if seg.end >= series.n_steps:
        raise ValueError("segment extends past the end of the series")
    if seg.length < 2:
        raise SegmentTooShortError(
            f"segment [{seg.start}, {seg.end}] has fewer than two intervals"
        )
    names: list[str] = []
    values: list[float] = []
    for j in _included_channels(series, include):
        meta = series.channels[j]
        if series.missing[seg.start : seg.end + 1, j].any():
            raise MissingDataError(
                f"channel {meta.name!r} has missing values in [{seg.start}, {seg.end}]"
            )
        window = series.values[seg.start : seg.end + 1, j]
        stats = channel_stats(window)
        wanted = ("mean",) if meta.hourly else STAT_NAMES
        for stat in wanted:
            names.append(feature_name(meta.name, stat))
            values.append(stats[stat])
    return StateVector(
        segment=seg,
        names=tuple(names),
        values=np.asarray(values, dtype=np.float64),
        label=1 if seg.label == "anomalous" else 0,
    )


@dataclass
class Dataset:
    """Feature matrix with labels; rows follow segment start order."""

    X: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...]
    segments: tuple[Segment, ...] | None = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.X.ndim != 2 or self.X.shape[0] != self.y.shape[0]:
            raise ValueError("X and y shapes disagree")
        if self.X.shape[1] != len(self.feature_names):
            raise ValueError("feature_names does not match X width")

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def class_counts(self) -> tuple[int, int]:
        return int(np.sum(self.y == 0)), int(np.sum(self.y == 1))


def build_dataset(
    segments: list[Segment],
    series: MarketSeries,
    include: list[str] | None = None,
) -> Dataset:
    """Summarize every segment into one labeled dataset.

    Requires at least one anomalous and one normal segment; a single-class
    collection cannot train a classifier.
    """
    if not segments:
        raise SingleClassDatasetError("no segments to summarize")
    ordered = sorted(segments, key=lambda s: (s.start, s.end))
    vectors = [summarize(s, series, include) for s in ordered]
    names = vectors[0].names
    for v in vectors[1:]:
        if v.names != names:
            raise DataError("segments produced inconsistent feature sets")
    X = np.stack([v.values for v in vectors])
    y = np.array([v.label for v in vectors], dtype=np.int64)
    if len(set(y.tolist())) < 2:
        raise SingleClassDatasetError(
            "need both anomalous and normal segments to build a dataset"
        )
    return Dataset(X=X, y=y, feature_names=names, segments=tuple(ordered))


def save_dataset(dataset: Dataset, path) -> None:
    """CSV with one row per segment: feature columns then a final label."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(dataset.feature_names) + ["label"])
        for i in range(dataset.n_rows):
            row = [repr(float(v)) for v in dataset.X[i]]
            row.append(str(int(dataset.y[i])))
            writer.writerow(row)


def load_dataset(path) -> Dataset:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        if not header or header[-1] != "label":
            raise DataError(f"{path} must end with a 'label' column")
        names = tuple(header[:-1])
        X_rows, y_rows = [], []
        for row in reader:
            X_rows.append([float(v) for v in row[:-1]])
            y_rows.append(int(row[-1]))
    if not X_rows:
        raise DataError(f"{path} has no data rows")
    return Dataset(
        X=np.asarray(X_rows, dtype=np.float64),
        y=np.asarray(y_rows, dtype=np.int64),
        feature_names=names,
    )
