"""Synthetic market scenarios with known ground truth.

Each scenario carries stationary driver channels (diurnal plus weekly
sinusoids plus seeded noise), a price channel mixed from them, and injected
events: a price spike with decaying shoulders plus a stress pulse in the
channels of one driver category (two in compound mode). The pulse on a
five-minute channel rises sharply at onset (>= 12 sigma at the core) and
decays over the following intervals, so every event window shows both an
elevated spread and a large positive extreme gradient on the stressed
channel; hourly channels get a level shift big enough to clear their
diurnal swing, which moves the window mean.

The spike magnitudes are structured so percentile detection is sound by
construction: every event peak exceeds the ceiling of all baseline and
shoulder prices, so a threshold cut anywhere between the baseline maximum
and the lowest peak detects every event and nothing else. With the default
ten events per category over thirty days, the 99th percentile lands in that
band; ``Scenario.suggested_high_percentile`` gives a safe cut for other
event counts.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from .errors import ConfigError
from .market import (
    STEPS_PER_DAY,
    STEPS_PER_HOUR,
    ChannelMeta,
    DriverCategory,
    MarketSeries,
    write_csv,
    write_schema,
)

CATEGORY_ORDER = tuple(DriverCategory)

_UNITS = {
    DriverCategory.CONGESTION: "$/MWh",
    DriverCategory.DAY_AHEAD: "$/MWh",
    DriverCategory.FORECAST_ERROR: "MW",
    DriverCategory.GENERATION: "MW",
    DriverCategory.REGULATION_PRICES: "$/MWh",
    DriverCategory.OTHERS: "MW",
}

_EVENT_SPACING = 36  # grid steps between candidate starts; keeps windows apart
_SHOULDER = (1.0, 0.35, 0.12)
_PULSE_FOOT = 0.15  # lead-in one interval before onset
_PULSE_TAIL = (0.6, 0.3)  # trailing decay after the stress core


@dataclass(frozen=True)
class SynthConfig:
    days: int = 30
    channels_per_category: int = 1
    events_per_category: int = 10
    seed: int = 0
    compound: bool = False  # two driver categories per event
    start: datetime = datetime(2021, 1, 1, tzinfo=timezone.utc)

    def __post_init__(self):
        if self.days < 2:
            raise ConfigError("need at least two days of data")
        if self.channels_per_category < 1:
            raise ConfigError("channels_per_category must be >= 1")
        if self.events_per_category < 1:
            raise ConfigError("events_per_category must be >= 1")


@dataclass(frozen=True)
class InjectedEvent:
    t_start: int
    t_end: int
    categories: tuple[DriverCategory, ...]
    magnitude: float  # price added at the peak
    channel_dev: float  # bump added to the driver channel(s)

    @property
    def category(self) -> DriverCategory:
        return self.categories[0]


@dataclass(frozen=True)
class Scenario:
    series: MarketSeries
    events: tuple[InjectedEvent, ...]
    config: SynthConfig
    suggested_high_percentile: float


def _sinusoid(n: int, period: float, amp: float, phase: float) -> np.ndarray:
    t = np.arange(n, dtype=np.float64)
    return amp * np.sin(2.0 * np.pi * (t - phase) / period)


def generate(config: SynthConfig) -> Scenario:
    """Build one scenario; identical seeds give identical scenarios."""
    rng = np.random.default_rng(config.seed)
    n = config.days * STEPS_PER_DAY
    cpc = config.channels_per_category

    metas: list[ChannelMeta] = [
        ChannelMeta("price", "$/MWh", DriverCategory.OTHERS, is_price_signal=True)
    ]
    params = []
    for cat in CATEGORY_ORDER:
        for i in range(cpc):
            params.append(
                {
                    "name": f"{cat.value}_{i}",
                    "cat": cat,
                    "hourly": cat is DriverCategory.DAY_AHEAD,
                    "offset": float(rng.uniform(20.0, 80.0)),
                    "diurnal": float(rng.uniform(3.0, 8.0)),
                    "weekly": float(rng.uniform(1.0, 2.0)),
                    "sigma": float(rng.uniform(1.0, 2.5)),
                    "phase": float(rng.uniform(0.0, STEPS_PER_DAY)),
                    "phase2": float(rng.uniform(0.0, 7.0 * STEPS_PER_DAY)),
                    "weight": float(rng.uniform(0.05, 0.15)),
                }
            )
            metas.append(
                ChannelMeta(
                    name=params[-1]["name"],
                    unit=_UNITS[cat],
                    category=cat,
                    hourly=params[-1]["hourly"],
                )
            )

    columns = [np.zeros(n)]  # price filled below
    for p in params:
        if p["hourly"]:
            n_hours = -(-n // STEPS_PER_HOUR)
            hourly = (
                p["offset"]
                + _sinusoid(n_hours, STEPS_PER_DAY / STEPS_PER_HOUR, p["diurnal"], 0.0)
                + p["weekly"]
                * np.sin(2.0 * np.pi * np.arange(n_hours) / (7.0 * 24.0))
                + p["sigma"] * rng.standard_normal(n_hours)
            )
            col = np.repeat(hourly, STEPS_PER_HOUR)[:n]
        else:
            col = (
                p["offset"]
                + _sinusoid(n, STEPS_PER_DAY, p["diurnal"], p["phase"])
                + _sinusoid(n, 7.0 * STEPS_PER_DAY, p["weekly"], p["phase2"])
                + p["sigma"] * rng.standard_normal(n)
            )
        columns.append(col)

    price = 40.0 + _sinusoid(n, STEPS_PER_DAY, 8.0, 0.0) + 1.5 * rng.standard_normal(n)
    for p, col in zip(params, columns[1:]):
        price = price + p["weight"] * (col - p["offset"])
    baseline_max = float(price.max())
    if baseline_max >= 300.0:
        raise ConfigError("baseline price ceiling too high for sound injection")

    total = len(CATEGORY_ORDER) * config.events_per_category
    margin = _EVENT_SPACING + STEPS_PER_HOUR
    candidates = np.arange(margin, n - margin, _EVENT_SPACING)
    if candidates.size < total:
        raise ConfigError(
            f"{config.days} days cannot hold {total} events {_EVENT_SPACING} steps apart"
        )
    starts = rng.permutation(candidates)[:total]
    cats = [cat for cat in CATEGORY_ORDER for _ in range(config.events_per_category)]
    durations = rng.integers(1, 4, size=total)

    by_cat = {cat: [i for i, p in enumerate(params) if p["cat"] is cat] for cat in CATEGORY_ORDER}
    events = []
    for t0, cat, dur in zip(starts, cats, durations):
        t0 = int(t0)
        dur = int(dur)
        chosen = [cat]
        if config.compound:
            others = [c for c in CATEGORY_ORDER if c is not cat]
            chosen.append(others[int(rng.integers(len(others)))])
        amp = baseline_max + 300.0 + 150.0 * float(rng.random())
        for off in range(dur):
            price[t0 + off] += amp * _SHOULDER[off]
        dev_used = 0.0
        for c in chosen:
            for j in by_cat[c]:
                p = params[j]
                col = columns[1 + j]
                if p["hourly"]:
                    # Hourly channels only expose a window mean downstream, so
                    # the shift must clear the channel's whole seasonal swing,
                    # not just its noise floor.
                    dev = 5.0 * (p["diurnal"] + p["weekly"]) + (
                        15.0 + 5.0 * float(rng.random())
                    ) * p["sigma"]
                    h0 = (t0 // STEPS_PER_HOUR) * STEPS_PER_HOUR
                    h1 = min(
                        ((t0 + dur - 1) // STEPS_PER_HOUR) * STEPS_PER_HOUR
                        + STEPS_PER_HOUR,
                        n,
                    )
                    col[h0:h1] += dev
                else:
                    # Sharp onset, gradual decay: the pulse is positive
                    # everywhere and its biggest step is always the upward one
                    # at onset, so stressed windows agree in sign on both the
                    # spread and the extreme gradient.
                    dev = (12.0 + 6.0 * float(rng.random())) * p["sigma"]
                    col[t0 - 1] += _PULSE_FOOT * dev
                    col[t0 : t0 + dur] += dev
                    for k, frac in enumerate(_PULSE_TAIL):
                        col[t0 + dur + k] += frac * dev
                if dev_used == 0.0:
                    dev_used = dev
        events.append(
            InjectedEvent(
                t_start=t0,
                t_end=t0 + dur - 1,
                categories=tuple(chosen),
                magnitude=amp,
                channel_dev=dev_used,
            )
        )
    events.sort(key=lambda e: e.t_start)

    peak_idx = np.array([e.t_start for e in events], dtype=np.int64)
    non_peak = np.ones(n, dtype=bool)
    non_peak[peak_idx] = False
    if float(price[peak_idx].min()) <= float(price[non_peak].max()):
        raise ConfigError("injection soundness violated; widen the magnitude band")

    columns[0] = price
    values = np.column_stack(columns)
    series = MarketSeries(
        start=config.start,
        channels=metas,
        values=values,
        missing=np.zeros_like(values, dtype=bool),
    )
    cut_rank = total + max(1, total // 3)
    suggested = 100.0 * (1.0 - cut_rank / (n - 1))
    return Scenario(
        series=series,
        events=tuple(events),
        config=config,
        suggested_high_percentile=suggested,
    )


def write_scenario(scenario: Scenario, out_dir) -> dict[str, str]:
    """Write data.csv, schema.yaml and the ground-truth sidecar truth.csv."""
    os.makedirs(out_dir, exist_ok=True)
    data_path = os.path.join(out_dir, "data.csv")
    schema_path = os.path.join(out_dir, "schema.yaml")
    truth_path = os.path.join(out_dir, "truth.csv")
    write_csv(scenario.series, data_path)
    write_schema(scenario.series.channels, schema_path)
    with open(truth_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["t_start", "t_end", "start_ts", "end_ts", "categories", "magnitude", "channel_dev"]
        )
        for ev in scenario.events:
            writer.writerow(
                [
                    ev.t_start,
                    ev.t_end,
                    scenario.series.timestamp_at(ev.t_start).isoformat(),
                    scenario.series.timestamp_at(ev.t_end).isoformat(),
                    "|".join(c.value for c in ev.categories),
                    repr(float(ev.magnitude)),
                    repr(float(ev.channel_dev)),
                ]
            )
    return {"data": data_path, "schema": schema_path, "truth": truth_path}


def load_truth(path) -> list[InjectedEvent]:
    events = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            events.append(
                InjectedEvent(
                    t_start=int(row["t_start"]),
                    t_end=int(row["t_end"]),
                    categories=tuple(
                        DriverCategory(v) for v in row["categories"].split("|")
                    ),
                    magnitude=float(row["magnitude"]),
                    channel_dev=float(row["channel_dev"]),
                )
            )
    return events
