"""Market time-series ingestion.

A series is a fixed five-minute grid of one price channel plus any number of
driver channels. CSVs carry a ``timestamp`` first column (ISO-8601, UTC) and
one numeric column per channel; empty cells are missing values. A YAML schema
maps each column to its unit, driver category, price flag and native cadence.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, replace
from datetime import datetime, timedelta, timezone

import numpy as np
import yaml

from .errors import (
    ConfigError,
    DataError,
    DuplicateTimestampError,
    EmptyFileError,
    MissingColumnError,
    MissingDataError,
    NonUniformGridError,
    UnfillableLeadingGapError,
)

INTERVAL = timedelta(minutes=5)
STEPS_PER_HOUR = 12
STEPS_PER_DAY = 288


class DriverCategory(str, enum.Enum):
    CONGESTION = "congestion"
    DAY_AHEAD = "day_ahead"
    FORECAST_ERROR = "forecast_error"
    GENERATION = "generation"
    REGULATION_PRICES = "regulation_prices"
    OTHERS = "others"


CATEGORY_LABELS = {
    DriverCategory.CONGESTION: "Congestion",
    DriverCategory.DAY_AHEAD: "Day-Ahead",
    DriverCategory.FORECAST_ERROR: "Forecasting Error",
    DriverCategory.GENERATION: "Generation",
    DriverCategory.REGULATION_PRICES: "Regulation Prices",
    DriverCategory.OTHERS: "Others",
}


@dataclass(frozen=True)
class ChannelMeta:
    """Schema entry for one CSV column.

    ``hourly`` marks channels published once per hour; they are step-expanded
    onto the five-minute grid at ingestion and later summarized by mean only.
    """

    name: str
    unit: str
    category: DriverCategory
    is_price_signal: bool = False
    hourly: bool = False


@dataclass
class MarketSeries:
    """Aligned multi-channel series on the five-minute grid."""

    start: datetime
    channels: list[ChannelMeta]
    values: np.ndarray  # (n_steps, n_channels) float64, NaN where missing
    missing: np.ndarray  # (n_steps, n_channels) bool
    interval: timedelta = INTERVAL

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.missing = np.asarray(self.missing, dtype=bool)
        if self.values.shape != self.missing.shape:
            raise ValueError("values and missing mask must have the same shape")
        if self.values.shape[1] != len(self.channels):
            raise ValueError("channel count does not match value columns")
        n_price = sum(1 for c in self.channels if c.is_price_signal)
        if n_price != 1:
            raise ConfigError(f"exactly one price channel required, found {n_price}")
        if self.start.tzinfo is None:
            self.start = self.start.replace(tzinfo=timezone.utc)

    @property
    def n_steps(self) -> int:
        return self.values.shape[0]

    @property
    def price_index(self) -> int:
        for i, c in enumerate(self.channels):
            if c.is_price_signal:
                return i
        raise ConfigError("no price channel")  # unreachable after __post_init__

    @property
    def prices(self) -> np.ndarray:
        return self.values[:, self.price_index]

    def channel_index(self, name: str) -> int:
        for i, c in enumerate(self.channels):
            if c.name == name:
                return i
        raise KeyError(name)

    def timestamp_at(self, step: int) -> datetime:
        return self.start + step * self.interval

    def timestamps(self) -> list[datetime]:
        return [self.timestamp_at(i) for i in range(self.n_steps)]


def _parse_timestamp(text: str) -> datetime:
    raw = text.strip()
    if raw.endswith("Z"):
        raw = raw[:-1] + "+00:00"
    try:
        ts = datetime.fromisoformat(raw)
    except ValueError as exc:
        raise NonUniformGridError(f"unparseable timestamp {text!r}") from exc
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def load_schema(path) -> list[ChannelMeta]:
    """Read the YAML channel schema, preserving file order."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict) or not raw:
        raise ConfigError(f"schema {path} must map column names to channel metadata")
    channels = []
    for name, meta in raw.items():
        if not isinstance(meta, dict):
            raise ConfigError(f"schema entry {name!r} must be a mapping")
        try:
            category = DriverCategory(meta["category"])
        except KeyError:
            raise ConfigError(f"schema entry {name!r} missing 'category'") from None
        except ValueError:
            raise ConfigError(
                f"schema entry {name!r} has unknown category {meta['category']!r}"
            ) from None
        channels.append(
            ChannelMeta(
                name=str(name),
                unit=str(meta.get("unit", "")),
                category=category,
                is_price_signal=bool(meta.get("is_price_signal", False)),
                hourly=bool(meta.get("hourly", False)),
            )
        )
    return channels


def write_schema(channels: list[ChannelMeta], path) -> None:
    doc = {
        c.name: {
            "unit": c.unit,
            "category": c.category.value,
            "is_price_signal": c.is_price_signal,
            "hourly": c.hourly,
        }
        for c in channels
    }
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(doc, fh, sort_keys=False)


def _step_expand(values: np.ndarray, missing: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Forward-fill hourly observations across the grid; leading gaps remain.
    n = values.shape[0]
    idx = np.where(~missing, np.arange(n), -1)
    np.maximum.accumulate(idx, out=idx)
    out_missing = idx < 0
    safe = np.where(out_missing, 0, idx)
    out = values[safe]
    out[out_missing] = np.nan
    return out, out_missing


def load_csv(path, schema: list[ChannelMeta], on_gap: str = "insert-missing") -> MarketSeries:
    """Load a CSV onto the five-minute grid.

    Rows are sorted by timestamp; duplicate timestamps are an error. Gaps in
    the grid are filled with all-missing rows under ``insert-missing`` (the
    default) or rejected under ``fail``. Hourly channels are step-expanded.
    Columns not named in the schema are ignored.
    """
    if on_gap not in ("insert-missing", "fail"):
        raise ConfigError(f"on_gap must be 'insert-missing' or 'fail', got {on_gap!r}")
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyFileError(f"{path} has no header row") from None
        rows = list(reader)
    if not rows:
        raise EmptyFileError(f"{path} has no data rows")
    if not header or header[0] != "timestamp":
        raise MissingColumnError(f"{path} must have 'timestamp' as its first column")
    col_pos = {name: i for i, name in enumerate(header)}
    for meta in schema:
        if meta.name not in col_pos:
            raise MissingColumnError(f"column {meta.name!r} not found in {path}")

    stamps = []
    for row in rows:
        stamps.append(_parse_timestamp(row[0]))
    order = sorted(range(len(rows)), key=lambda i: stamps[i])
    stamps = [stamps[i] for i in order]
    rows = [rows[i] for i in order]
    for a, b in zip(stamps, stamps[1:]):
        if a == b:
            raise DuplicateTimestampError(f"timestamp {a.isoformat()} appears twice")

    start = stamps[0]
    steps = []
    for ts in stamps:
        delta = ts - start
        q, rem = divmod(delta, INTERVAL)
        if rem:
            raise NonUniformGridError(
                f"timestamp {ts.isoformat()} is off the five-minute grid"
            )
        steps.append(q)
    n = steps[-1] + 1
    if n != len(rows) and on_gap == "fail":
        raise MissingDataError(f"{path} has gaps in the timestamp grid")

    k = len(schema)
    values = np.full((n, k), np.nan)
    missing = np.ones((n, k), dtype=bool)
    positions = [col_pos[m.name] for m in schema]
    for step, row in zip(steps, rows):
        for j, pos in enumerate(positions):
            cell = row[pos].strip() if pos < len(row) else ""
            if cell:
                try:
                    values[step, j] = float(cell)
                except ValueError:
                    raise DataError(
                        f"non-numeric cell {cell!r} in column {schema[j].name!r}"
                    ) from None
                missing[step, j] = False

    for j, meta in enumerate(schema):
        if meta.hourly and not missing[:, j].all():
            values[:, j], missing[:, j] = _step_expand(values[:, j], missing[:, j])

    return MarketSeries(start=start, channels=list(schema), values=values, missing=missing)


def fill_gaps(series: MarketSeries, policy: str = "forward-fill") -> MarketSeries:
    """Return a copy with missing driver values filled.

    Policies: ``forward-fill`` carries the last observation (a leading gap is
    an error); ``linear`` interpolates interior gaps and extends edges with
    the nearest observation; ``fail`` errors on any missing value. Observed
    values are never altered. The price channel must be complete under every
    policy; missing prices are always an error.
    """
    if policy not in ("forward-fill", "linear", "fail"):
        raise ConfigError(f"unknown fill policy {policy!r}")
    values = series.values.copy()
    missing = series.missing.copy()
    price = series.price_index
    if missing[:, price].any():
        raise MissingDataError(
            f"price channel {series.channels[price].name!r} has missing values"
        )
    for j, meta in enumerate(series.channels):
        col_missing = missing[:, j]
        if not col_missing.any():
            continue
        if policy == "fail":
            raise MissingDataError(f"channel {meta.name!r} has missing values")
        if col_missing.all():
            raise MissingDataError(f"channel {meta.name!r} has no observations")
        if policy == "forward-fill":
            if col_missing[0]:
                raise UnfillableLeadingGapError(
                    f"channel {meta.name!r} starts with a gap"
                )
            filled, still = _step_expand(values[:, j], col_missing)
            values[:, j] = filled
        else:  # linear
            obs = np.nonzero(~col_missing)[0]
            values[:, j] = np.interp(np.arange(series.n_steps), obs, values[obs, j])
        missing[:, j] = False
    return replace(series, values=values, missing=missing)


def _format_cell(v: float, miss: bool) -> str:
    return "" if miss else repr(float(v))


def write_csv(series: MarketSeries, path) -> None:
    """Write the series back to CSV; loading the file again is lossless."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["timestamp"] + [c.name for c in series.channels])
        for i in range(series.n_steps):
            ts = series.timestamp_at(i).isoformat()
            row = [ts] + [
                _format_cell(series.values[i, j], series.missing[i, j])
                for j in range(len(series.channels))
            ]
            writer.writerow(row)
