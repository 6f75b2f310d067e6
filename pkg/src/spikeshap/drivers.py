"""Map feature attributions onto market driver categories.

A spike segment's explanation is reduced to the channels behind its top
positive attributions; each channel's schema category then votes for one of
the six driver categories. Segments may end up with several drivers (the
category sets overlap), or with none when no feature pushed toward the spike
class.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .detect import Segment, daytime_of, local_time, season_of, DAYTIMES, SEASONS
from .errors import UnknownChannelError
from .features import split_feature_name
from .market import DriverCategory, MarketSeries
from .shapley import Explanation, rank_drivers


@dataclass(frozen=True)
class DriverReport:
    """Attribution of one anomalous segment."""

    segment: Segment
    drivers: frozenset[DriverCategory]
    top_features: tuple[tuple[str, str, float], ...]  # (feature, category, phi)
    season: str
    daytime: str


@dataclass(frozen=True)
class DriverSummary:
    """Aggregate over many reports.

    Percentages count segments naming each category, so multi-driver
    segments make the column sum exceed 100.
    """

    n_segments: int
    n_unattributed: int
    category_pct: dict[DriverCategory, float]
    category_counts: dict[DriverCategory, int]
    by_season_daytime: dict[DriverCategory, dict[tuple[str, str], int]]
    channel_counts: dict[DriverCategory, dict[str, int]]


def attribute(
    explanation: Explanation,
    series: MarketSeries,
    seg: Segment,
    tz_offset: float = 0.0,
    k: int = 5,
    min_phi: float = 0.0,
) -> DriverReport:
    """Build the driver report for one explained segment.

    Takes the top-k positive attributions with phi > min_phi, resolves each
    feature to its channel and category, and stamps the segment with the
    season and daytime of its midpoint in local time.
    """
    categories = {c.name: c.category for c in series.channels}
    top = []
    drivers = set()
    for name, phi in rank_drivers(explanation, k):
        if phi <= min_phi:
            continue
        channel, _ = split_feature_name(name)
        if channel not in categories:
            raise UnknownChannelError(f"feature {name!r} names unknown channel {channel!r}")
        category = categories[channel]
        top.append((name, category.value, phi))
        drivers.add(category)
    ts = local_time(series, seg.midpoint(), tz_offset)
    return DriverReport(
        segment=seg,
        drivers=frozenset(drivers),
        top_features=tuple(top),
        season=season_of(ts),
        daytime=daytime_of(ts),
    )


def aggregate(reports: list[DriverReport]) -> DriverSummary:
    n = len(reports)
    counts = {c: 0 for c in DriverCategory}
    buckets = {
        c: {(s, d): 0 for s in SEASONS for d in DAYTIMES} for c in DriverCategory
    }
    channels: dict[DriverCategory, dict[str, int]] = {c: {} for c in DriverCategory}
    unattributed = 0
    for rep in reports:
        if not rep.drivers:
            unattributed += 1
        for cat in sorted(rep.drivers, key=lambda c: c.value):
            counts[cat] += 1
            buckets[cat][(rep.season, rep.daytime)] += 1
        for name, cat_value, _phi in rep.top_features:
            cat = DriverCategory(cat_value)
            channel, _ = split_feature_name(name)
            channels[cat][channel] = channels[cat].get(channel, 0) + 1
    pct = {c: (100.0 * counts[c] / n if n else 0.0) for c in DriverCategory}
    channels = {c: dict(sorted(m.items())) for c, m in channels.items()}
    return DriverSummary(
        n_segments=n,
        n_unattributed=unattributed,
        category_pct=pct,
        category_counts=counts,
        by_season_daytime=buckets,
        channel_counts=channels,
    )
