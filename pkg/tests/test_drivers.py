"""Driver mapping: feature attributions to categories and aggregates."""

from __future__ import annotations

import numpy as np
import pytest

from spikeshap.detect import Segment
from spikeshap.drivers import aggregate, attribute
from spikeshap.errors import UnknownChannelError
from spikeshap.market import STEPS_PER_DAY, DriverCategory
from spikeshap.shapley import Explanation

from .conftest import make_series


def series_two_categories(n=2 * STEPS_PER_DAY):
    return make_series(
        np.full(n, 30.0),
        {"cong": np.zeros(n), "gen": np.zeros(n)},
        categories={
            "cong": DriverCategory.CONGESTION,
            "gen": DriverCategory.GENERATION,
        },
    )


def explanation(names, phi):
    return Explanation(
        base_value=0.2,
        phi=np.asarray(phi, dtype=np.float64),
        prediction=0.8,
        feature_names=tuple(names),
        segment=None,
    )


NAMES = ("cong__std", "cong__mean", "gen__max_grad", "gen__avg_grad")


class TestAttribute:
    def test_maps_features_to_categories(self):
        s = series_two_categories()
        seg = Segment("anomalous", 100, 112, event_index=0)
        exp = explanation(NAMES, [0.3, -0.1, 0.2, 0.0])
        rep = attribute(exp, s, seg)
        assert rep.drivers == frozenset(
            {DriverCategory.CONGESTION, DriverCategory.GENERATION}
        )
        assert rep.top_features == (
            ("cong__std", "congestion", 0.3),
            ("gen__max_grad", "generation", 0.2),
        )

    def test_min_phi_filters(self):
        s = series_two_categories()
        seg = Segment("anomalous", 100, 112, event_index=0)
        exp = explanation(NAMES, [0.3, 0.0, 0.01, 0.0])
        rep = attribute(exp, s, seg, min_phi=0.05)
        assert rep.drivers == frozenset({DriverCategory.CONGESTION})

    def test_k_limits_features(self):
        s = series_two_categories()
        seg = Segment("anomalous", 100, 112, event_index=0)
        exp = explanation(NAMES, [0.4, 0.3, 0.2, 0.1])
        rep = attribute(exp, s, seg, k=1)
        assert len(rep.top_features) == 1

    def test_no_positive_phi_unattributed(self):
        s = series_two_categories()
        seg = Segment("anomalous", 100, 112, event_index=0)
        exp = explanation(NAMES, [-0.1, -0.2, 0.0, -0.3])
        rep = attribute(exp, s, seg)
        assert rep.drivers == frozenset()
        assert rep.top_features == ()

    def test_unknown_channel_rejected(self):
        s = series_two_categories()
        seg = Segment("anomalous", 100, 112, event_index=0)
        exp = explanation(("mystery__std",), [0.5])
        with pytest.raises(UnknownChannelError):
            attribute(exp, s, seg)

    def test_season_daytime_from_midpoint_local_time(self):
        s = series_two_categories()
        # midpoint step 150 = 12:30 UTC on Jan 1; tz -6 -> 06:30 local morning
        seg = Segment("anomalous", 144, 156, event_index=0)
        exp = explanation(NAMES, [0.3, 0.0, 0.0, 0.0])
        rep = attribute(exp, s, seg, tz_offset=-6.0)
        assert rep.season == "winter"
        assert rep.daytime == "morning"


class TestAggregate:
    def test_counts_and_percentages(self):
        s = series_two_categories()
        seg = Segment("anomalous", 100, 112, event_index=0)
        reports = [
            attribute(explanation(NAMES, [0.3, 0.0, 0.2, 0.0]), s, seg),
            attribute(explanation(NAMES, [0.3, 0.0, 0.0, 0.0]), s, seg),
            attribute(explanation(NAMES, [-0.1, 0.0, 0.0, 0.0]), s, seg),
        ]
        summary = aggregate(reports)
        assert summary.n_segments == 3
        assert summary.n_unattributed == 1
        assert summary.category_counts[DriverCategory.CONGESTION] == 2
        assert summary.category_counts[DriverCategory.GENERATION] == 1
        assert summary.category_pct[DriverCategory.CONGESTION] == pytest.approx(200 / 3)
        assert summary.category_pct[DriverCategory.GENERATION] == pytest.approx(100 / 3)

    def test_bucket_grid_is_complete(self):
        s = series_two_categories()
        seg = Segment("anomalous", 100, 112, event_index=0)
        summary = aggregate([attribute(explanation(NAMES, [0.3, 0, 0, 0]), s, seg)])
        grid = summary.by_season_daytime[DriverCategory.CONGESTION]
        assert len(grid) == 16
        assert grid[("winter", "morning")] == 1  # step 106 is 08:50 UTC
        assert sum(grid.values()) == 1

    def test_channel_counts(self):
        s = series_two_categories()
        seg = Segment("anomalous", 100, 112, event_index=0)
        reports = [
            attribute(explanation(NAMES, [0.3, 0.2, 0.0, 0.0]), s, seg),
            attribute(explanation(NAMES, [0.3, 0.0, 0.0, 0.0]), s, seg),
        ]
        summary = aggregate(reports)
        assert summary.channel_counts[DriverCategory.CONGESTION] == {"cong": 3}

    def test_empty(self):
        summary = aggregate([])
        assert summary.n_segments == 0
        assert all(v == 0.0 for v in summary.category_pct.values())
