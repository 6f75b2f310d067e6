"""Price-spike detection and segmentation.

A spike point is any interval whose price strictly exceeds the high
threshold. Consecutive spike points form one event; the series is then cut
into anomalous segments (a window around each event) and hour-long normal
segments tiled over the rest.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from datetime import datetime, timedelta

import numpy as np

from .errors import ConfigError, DegenerateSeriesWarning
from .market import STEPS_PER_HOUR, MarketSeries

SEASONS = ("winter", "spring", "summer", "fall")
DAYTIMES = ("morning", "midday", "evening", "night")

_SEASON_BY_MONTH = {
    12: "winter", 1: "winter", 2: "winter",
    3: "spring", 4: "spring", 5: "spring",
    6: "summer", 7: "summer", 8: "summer",
    9: "fall", 10: "fall", 11: "fall",
}


def season_of(ts: datetime) -> str:
    return _SEASON_BY_MONTH[ts.month]


def daytime_of(ts: datetime) -> str:
    """Bucket a local timestamp: morning 06-11, midday 11-16, evening 16-22,
    night 22-06 (half-open on the right)."""
    h = ts.hour + ts.minute / 60.0 + ts.second / 3600.0
    if 6.0 <= h < 11.0:
        return "morning"
    if 11.0 <= h < 16.0:
        return "midday"
    if 16.0 <= h < 22.0:
        return "evening"
    return "night"


def local_time(series: MarketSeries, step: int, tz_offset: float) -> datetime:
    """Timestamp of a grid step shifted into local time by tz_offset hours."""
    return series.timestamp_at(step) + timedelta(hours=tz_offset)


@dataclass(frozen=True)
class ThresholdSpec:
    """Either fixed dollar thresholds or percentiles of the price channel."""

    mode: str  # "fixed" | "percentile"
    moderate: float
    high: float

    def __post_init__(self):
        if self.mode not in ("fixed", "percentile"):
            raise ConfigError(f"threshold mode must be fixed|percentile, got {self.mode!r}")
        if self.mode == "percentile":
            if not (0.0 < self.moderate < 100.0 and 0.0 < self.high < 100.0):
                raise ConfigError("percentile thresholds must lie in (0, 100)")
            if self.moderate > self.high:
                raise ConfigError("moderate percentile must not exceed high percentile")


@dataclass(frozen=True)
class SpikeEvent:
    """A maximal run of consecutive spike points."""

    t_first: int
    t_last: int
    point_indices: tuple[int, ...]
    peak_value: float

    @property
    def duration_intervals(self) -> int:
        return self.t_last - self.t_first + 1


@dataclass(frozen=True)
class Segment:
    """Half of the partition: an event window or a normal tile.

    ``start``/``end`` are inclusive grid steps; ``event_index`` points at the
    earliest source event for anomalous segments and is None for normal ones.
    """

    label: str  # "anomalous" | "normal"
    start: int
    end: int
    event_index: int | None = None

    def __post_init__(self):
        if self.label not in ("anomalous", "normal"):
            raise ValueError(f"bad segment label {self.label!r}")
        if self.end < self.start:
            raise ValueError("segment end precedes start")

    @property
    def length(self) -> int:
        return self.end - self.start + 1

    def midpoint(self) -> int:
        return (self.start + self.end) // 2


def resolve_thresholds(series: MarketSeries, spec: ThresholdSpec) -> tuple[float, float]:
    """Return (moderate_value, high_value) in price units.

    Percentiles use linear interpolation between order statistics, i.e. the
    value at zero-based rank (p/100)*(n-1) of the sorted prices. A constant
    price series collapses both thresholds and triggers a warning.
    """
    if spec.mode == "fixed":
        moderate, high = float(spec.moderate), float(spec.high)
    else:
        prices = series.prices
        prices = prices[~np.isnan(prices)]
        if prices.size == 0:
            raise ConfigError("cannot take percentiles of an all-missing price channel")
        moderate, high = (
            float(np.percentile(prices, spec.moderate)),
            float(np.percentile(prices, spec.high)),
        )
        if prices.size and float(prices.min()) == float(prices.max()):
            warnings.warn(
                "price channel is constant; percentile thresholds are degenerate",
                DegenerateSeriesWarning,
                stacklevel=2,
            )
    if moderate > high:
        raise ConfigError(
            f"moderate threshold {moderate} exceeds high threshold {high} after resolution"
        )
    return moderate, high


def detect_points(series: MarketSeries, high_value: float) -> np.ndarray:
    """Indices whose price strictly exceeds the high threshold.

    A price exactly equal to the threshold is not a spike.
    """
    prices = series.prices
    with np.errstate(invalid="ignore"):
        mask = prices > high_value
    return np.nonzero(mask)[0]


def group_events(
    points: np.ndarray | list[int],
    prices: np.ndarray | None = None,
    max_gap: int = 0,
) -> list[SpikeEvent]:
    """Group spike points into events.

    Points separated by more than ``max_gap`` non-spike intervals start a new
    event; the default 0 keeps only directly adjacent points together, so a
    single interval of calm already separates two events. ``prices`` supplies
    peak values (NaN when omitted).
    """
    if max_gap < 0:
        raise ConfigError("max_gap must be >= 0")
    pts = np.asarray(points, dtype=np.int64)
    if pts.size == 0:
        return []
    if np.any(np.diff(pts) <= 0):
        raise ValueError("spike points must be strictly increasing")
    events = []
    run_start = 0
    for i in range(1, pts.size + 1):
        if i == pts.size or pts[i] - pts[i - 1] > max_gap + 1:
            run = pts[run_start:i]
            peak = float(np.max(prices[run])) if prices is not None else float("nan")
            events.append(
                SpikeEvent(
                    t_first=int(run[0]),
                    t_last=int(run[-1]),
                    point_indices=tuple(int(p) for p in run),
                    peak_value=peak,
                )
            )
            run_start = i
    return events


def segment(
    series: MarketSeries,
    events: list[SpikeEvent],
    b_len: int = 6,
    f_len: int = 6,
) -> list[Segment]:
    """Partition the grid into anomalous windows and hour-long normal tiles.

    Each event claims [t_first - b_len, t_last + f_len] clipped to the series;
    overlapping windows merge and keep the earliest event as reference. The
    remaining stretches are tiled left to right with 12-interval normal
    segments. A partial tile is kept only when it touches the end of the
    series (and still spans at least two intervals); interior remainders stay
    unsegmented so no window is ever stretched or shifted.
    """
    if b_len < 0 or f_len < 0:
        raise ConfigError("b_len and f_len must be >= 0")
    n = series.n_steps
    windows: list[tuple[int, int, int]] = []
    last = -1
    for i, ev in enumerate(events):
        if ev.t_first <= last:
            raise ValueError("events must be sorted and non-overlapping")
        last = ev.t_last
        lo = max(0, ev.t_first - b_len)
        hi = min(n - 1, ev.t_last + f_len)
        if windows and lo <= windows[-1][1]:
            plo, phi, pidx = windows[-1]
            windows[-1] = (plo, max(phi, hi), pidx)
        else:
            windows.append((lo, hi, i))

    segments: list[Segment] = []
    cursor = 0
    for lo, hi, idx in windows + [(n, n, -1)]:
        gap_end = min(lo, n) - 1
        pos = cursor
        while pos + STEPS_PER_HOUR - 1 <= gap_end:
            segments.append(Segment("normal", pos, pos + STEPS_PER_HOUR - 1))
            pos += STEPS_PER_HOUR
        if gap_end == n - 1 and pos <= gap_end and gap_end - pos + 1 >= 2:
            # truncated tile at the end of the data
            segments.append(Segment("normal", pos, gap_end))
        if idx >= 0:
            segments.append(Segment("anomalous", lo, hi, event_index=idx))
            cursor = hi + 1
    segments.sort(key=lambda s: s.start)
    return segments


@dataclass(frozen=True)
class EventStats:
    """Event counts bucketed by season, time of day and duration."""

    n_events: int
    by_season: dict[str, int]
    by_daytime: dict[str, int]
    duration_histogram: dict[int, int]
    frac_longer_than_hour: float


def event_statistics(
    events: list[SpikeEvent],
    series: MarketSeries,
    tz_offset: float = 0.0,
) -> EventStats:
    """Bucket events by the local time of their first spike point."""
    by_season = {s: 0 for s in SEASONS}
    by_daytime = {d: 0 for d in DAYTIMES}
    histogram: dict[int, int] = {}
    longer = 0
    for ev in events:
        ts = local_time(series, ev.t_first, tz_offset)
        by_season[season_of(ts)] += 1
        by_daytime[daytime_of(ts)] += 1
        d = ev.duration_intervals
        histogram[d] = histogram.get(d, 0) + 1
        if d > STEPS_PER_HOUR:
            longer += 1
    frac = longer / len(events) if events else 0.0
    return EventStats(
        n_events=len(events),
        by_season=by_season,
        by_daytime=by_daytime,
        duration_histogram=dict(sorted(histogram.items())),
        frac_longer_than_hour=frac,
    )
