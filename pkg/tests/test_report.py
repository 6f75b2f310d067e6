"""Report artifacts: SVG radar charts and the report directory."""

from __future__ import annotations

import xml.etree.ElementTree as ET

import numpy as np
import pytest

from spikeshap.cluster import fit
from spikeshap.detect import detect_points, event_statistics, group_events
from spikeshap.drivers import aggregate
from spikeshap.errors import TooFewAxesError
from spikeshap.report import (
    ReportInputs,
    axis_label,
    cluster_radars,
    radar_chart,
    render_report,
    scale_axes,
)

from .conftest import make_series


class TestRadarChart:
    def test_valid_svg(self):
        svg = radar_chart(["a", "b", "c"], [0.5, 0.7, 0.9], title="demo")
        root = ET.fromstring(svg)
        assert root.tag.endswith("svg")
        polys = [e for e in root.iter() if e.tag.endswith("polygon")]
        # four rings plus the data polygon
        assert len(polys) == 5

    def test_too_few_axes(self):
        with pytest.raises(TooFewAxesError):
            radar_chart(["a", "b"], [0.5, 0.5])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            radar_chart(["a", "b", "c"], [0.5, 0.5])

    def test_deterministic_text(self):
        a = radar_chart(["x", "y", "z"], [0.1, 0.2, 0.3])
        b = radar_chart(["x", "y", "z"], [0.1, 0.2, 0.3])
        assert a == b

    def test_coordinates_quantized(self):
        svg = radar_chart(["a", "b", "c"], [1 / 3, 2 / 7, 0.123456])
        for token in svg.split('points="')[1].split('"')[0].replace(",", " ").split():
            whole, frac = token.split(".")
            assert len(frac) == 2

    def test_axis_zero_points_up(self):
        svg = radar_chart(["a", "b", "c", "d"], [1.0, 1.0, 1.0, 1.0])
        pts = svg.split('points="')[-1].split('"')[0].split()
        x0, y0 = map(float, pts[0].split(","))
        assert x0 == pytest.approx(220.0)
        assert y0 == pytest.approx(70.0)  # 220 - 150


class TestScaleAxes:
    def test_min_max_to_band(self):
        out = scale_axes(
            np.array([0.0, 5.0, 10.0]), np.zeros(3), np.full(3, 10.0)
        )
        assert out[0] == pytest.approx(0.1)
        assert out[1] == pytest.approx(0.55)
        assert out[2] == pytest.approx(1.0)

    def test_degenerate_axis_midband(self):
        out = scale_axes(np.array([4.0]), np.array([4.0]), np.array([4.0]))
        assert out[0] == pytest.approx(0.55)


class TestAxisLabel:
    def test_symbols(self):
        assert axis_label("gen__mean") == "gen μ"
        assert axis_label("gen__std") == "gen σ"


class TestClusterRadars:
    def test_one_chart_per_cluster(self):
        rng = np.random.default_rng(0)
        X = np.concatenate(
            [rng.standard_normal((20, 4)) + off for off in (0.0, 6.0, -6.0)]
        )
        names = ("a__mean", "b__std", "c__avg_grad", "d__max_grad")
        model = fit(X, 3, seed=0, feature_names=names)
        charts = cluster_radars(model, m=3)
        assert sorted(charts) == [0, 1, 2]
        for svg in charts.values():
            assert svg.startswith("<svg ")
            assert "cluster " in svg

    def test_too_few_features(self):
        rng = np.random.default_rng(1)
        model = fit(rng.standard_normal((12, 2)), 2, seed=0,
                    feature_names=("a__mean", "b__std"))
        with pytest.raises(TooFewAxesError):
            cluster_radars(model)


def report_inputs():
    rng = np.random.default_rng(5)
    prices = rng.uniform(10, 100, 600)
    prices[[50, 200, 420]] = 500.0
    s = make_series(prices)
    events = group_events(detect_points(s, 400.0), s.prices)
    stats = event_statistics(events, s)
    X = np.concatenate(
        [rng.standard_normal((15, 4)) + off for off in (0.0, 8.0, -8.0)]
    )
    model = fit(X, 3, seed=0,
                feature_names=("a__mean", "b__std", "c__avg_grad", "d__max_grad"))
    return ReportInputs(
        series=s,
        events=events,
        stats=stats,
        driver_summary=aggregate([]),
        cluster_model=model,
        metrics={"accuracy": 0.95, "recall": 0.9, "precision": 0.8,
                 "false_positive_rate": 0.05, "tn": 90, "fp": 5, "fn": 1, "tp": 9},
        thresholds={"moderate": 120.0, "high": 400.0},
    )


class TestRenderReport:
    def test_files_written(self, tmp_path):
        written = render_report(report_inputs(), tmp_path)
        assert set(written) == {
            "events.csv",
            "drivers.csv",
            "drivers_by_season_daytime.csv",
            "clusters.csv",
            "radar_cluster_00.svg",
            "radar_cluster_01.svg",
            "radar_cluster_02.svg",
            "summary.txt",
        }
        for name in written:
            assert (tmp_path / name).exists()

    def test_byte_identical_rerun(self, tmp_path):
        d1 = tmp_path / "r1"
        d2 = tmp_path / "r2"
        written = render_report(report_inputs(), d1)
        render_report(report_inputs(), d2)
        for name in written:
            assert (d1 / name).read_bytes() == (d2 / name).read_bytes()

    def test_events_csv_contents(self, tmp_path):
        render_report(report_inputs(), tmp_path)
        lines = (tmp_path / "events.csv").read_text().splitlines()
        assert lines[0] == "event_id,start_ts,end_ts,duration_intervals,peak_value"
        assert len(lines) == 4  # header + 3 events
        assert lines[1].startswith("ev0000,")
        assert lines[1].endswith(",500.0")

    def test_summary_header_and_metrics(self, tmp_path):
        render_report(report_inputs(), tmp_path)
        text = (tmp_path / "summary.txt").read_text()
        assert text.startswith("report-format: 1\n")
        assert "classifier: accuracy=0.9500" in text
        assert "confusion: tn=90 fp=5 fn=1 tp=9" in text
        assert "clusters: k=3" in text

    def test_bucket_csv_has_full_grid(self, tmp_path):
        render_report(report_inputs(), tmp_path)
        lines = (tmp_path / "drivers_by_season_daytime.csv").read_text().splitlines()
        assert len(lines) == 1 + 6 * 4 * 4

    def test_no_cluster_model(self, tmp_path):
        inputs = report_inputs()
        from dataclasses import replace

        written = render_report(replace(inputs, cluster_model=None), tmp_path)
        assert "clusters.csv" in written
        assert not any(name.startswith("radar_") for name in written)
