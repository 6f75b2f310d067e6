"""Synthetic scenarios: determinism, injection soundness, ground truth I/O."""

from __future__ import annotations

import numpy as np
import pytest

from spikeshap.detect import ThresholdSpec, detect_points, group_events, resolve_thresholds
from spikeshap.errors import ConfigError
from spikeshap.market import STEPS_PER_HOUR, DriverCategory, load_csv, load_schema
from spikeshap.synth import (
    CATEGORY_ORDER,
    InjectedEvent,
    SynthConfig,
    generate,
    load_truth,
    write_scenario,
)


class TestConfig:
    def test_defaults(self):
        cfg = SynthConfig()
        assert cfg.days == 30 and cfg.events_per_category == 10

    @pytest.mark.parametrize(
        "kwargs", [{"days": 1}, {"channels_per_category": 0}, {"events_per_category": 0}]
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigError):
            SynthConfig(**kwargs)

    def test_too_many_events_for_horizon(self):
        with pytest.raises(ConfigError, match="events"):
            generate(SynthConfig(days=2, events_per_category=30))


class TestGenerate:
    def test_deterministic(self):
        a = generate(SynthConfig(days=3, events_per_category=2, seed=5))
        b = generate(SynthConfig(days=3, events_per_category=2, seed=5))
        assert np.array_equal(a.series.values, b.series.values)
        assert a.events == b.events
        assert a.suggested_high_percentile == b.suggested_high_percentile

    def test_seed_matters(self):
        a = generate(SynthConfig(days=3, events_per_category=2, seed=5))
        b = generate(SynthConfig(days=3, events_per_category=2, seed=6))
        assert not np.array_equal(a.series.values, b.series.values)

    def test_event_counts_and_categories(self):
        sc = generate(SynthConfig(days=10, events_per_category=3, seed=0))
        assert len(sc.events) == 18
        by_cat = {}
        for ev in sc.events:
            by_cat[ev.category] = by_cat.get(ev.category, 0) + 1
        assert by_cat == {cat: 3 for cat in CATEGORY_ORDER}

    def test_events_sorted_and_spaced(self):
        sc = generate(SynthConfig(days=10, events_per_category=3, seed=1))
        starts = [ev.t_start for ev in sc.events]
        assert starts == sorted(starts)
        assert min(np.diff(starts)) >= 36

    def test_injection_soundness(self):
        sc = generate(SynthConfig(days=10, events_per_category=3, seed=2))
        prices = sc.series.prices
        peaks = np.array([ev.t_start for ev in sc.events])
        mask = np.ones(prices.size, dtype=bool)
        mask[peaks] = False
        assert prices[peaks].min() > prices[mask].max()

    def test_suggested_percentile_detects_every_event(self):
        for seed in (0, 1, 2):
            sc = generate(SynthConfig(days=10, events_per_category=3, seed=seed))
            spec = ThresholdSpec("percentile", 95.0, sc.suggested_high_percentile)
            _, high = resolve_thresholds(sc.series, spec)
            events = group_events(detect_points(sc.series, high), sc.series.prices)
            assert len(events) == len(sc.events)
            for got, truth in zip(events, sc.events):
                assert got.t_first == truth.t_start

    def test_channel_count(self):
        sc = generate(SynthConfig(days=3, events_per_category=1, channels_per_category=2))
        # price + 6 categories x 2
        assert len(sc.series.channels) == 13

    def test_day_ahead_piecewise_hourly(self):
        sc = generate(SynthConfig(days=3, events_per_category=1, seed=3))
        j = sc.series.channel_index("day_ahead_0")
        col = sc.series.values[:, j]
        blocks = col.reshape(-1, STEPS_PER_HOUR)
        assert (blocks == blocks[:, :1]).all()

    def test_stress_pulse_shape(self):
        sc = generate(SynthConfig(days=10, events_per_category=3, seed=4))
        for ev in sc.events:
            cat = ev.category
            if cat is DriverCategory.DAY_AHEAD:
                continue
            j = sc.series.channel_index(f"{cat.value}_0")
            col = sc.series.values[:, j]
            window = col[ev.t_start - 6 : ev.t_end + 7]
            diffs = np.diff(window)
            k = int(np.argmax(np.abs(diffs)))
            # biggest move in the stressed window is the upward onset step
            assert diffs[k] > 0

    def test_compound_events_have_two_categories(self):
        sc = generate(SynthConfig(days=10, events_per_category=2, seed=5, compound=True))
        for ev in sc.events:
            assert len(ev.categories) == 2
            assert len(set(ev.categories)) == 2


class TestScenarioIO:
    def test_write_and_reload(self, tmp_path):
        sc = generate(SynthConfig(days=3, events_per_category=2, seed=7))
        paths = write_scenario(sc, tmp_path)
        schema = load_schema(paths["schema"])
        series = load_csv(paths["data"], schema)
        assert series.n_steps == sc.series.n_steps
        assert np.array_equal(series.values, sc.series.values)
        truth = load_truth(paths["truth"])
        assert len(truth) == len(sc.events)
        for got, want in zip(truth, sc.events):
            assert got.t_start == want.t_start
            assert got.t_end == want.t_end
            assert got.categories == want.categories

    def test_truth_preserves_compound_categories(self, tmp_path):
        sc = generate(SynthConfig(days=10, events_per_category=2, seed=8, compound=True))
        paths = write_scenario(sc, tmp_path)
        truth = load_truth(paths["truth"])
        assert all(len(ev.categories) == 2 for ev in truth)
