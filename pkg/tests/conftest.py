"""Shared fixtures and builders for the test suite."""

from __future__ import annotations

import re
import sys
from datetime import datetime, timezone

import numpy as np
import pytest

from spikeshap.market import ChannelMeta, DriverCategory, MarketSeries

START = datetime(2021, 1, 1, tzinfo=timezone.utc)


def make_series(
    prices,
    extra: dict[str, np.ndarray] | None = None,
    categories: dict[str, DriverCategory] | None = None,
    hourly: set[str] | None = None,
    start: datetime = START,
) -> MarketSeries:
    """Build a series from a price array plus optional named channels."""
    prices = np.asarray(prices, dtype=np.float64)
    extra = extra or {}
    categories = categories or {}
    hourly = hourly or set()
    channels = [ChannelMeta("price", "$/MWh", DriverCategory.OTHERS, is_price_signal=True)]
    cols = [prices]
    for name, vals in extra.items():
        cat = categories.get(name, DriverCategory.GENERATION)
        channels.append(ChannelMeta(name, "MW", cat, hourly=name in hourly))
        cols.append(np.asarray(vals, dtype=np.float64))
    values = np.column_stack(cols)
    return MarketSeries(start, channels, values, np.zeros(values.shape, dtype=bool))


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def flat_series():
    """Constant price 50 with one quiet driver channel; 2 days long."""
    n = 2 * 288
    return make_series(np.full(n, 50.0), {"gen": np.full(n, 10.0)})


def pytest_runtest_logreport(report):
    """Echo one explicit pass/fail line per acceptance criterion."""
    if report.when != "call" or "test_acceptance.py" not in report.nodeid:
        return
    match = re.search(r"criterion_(\d+)", report.nodeid)
    if match is None:
        return
    status = "PASS" if report.passed else ("FAIL" if report.failed else "SKIP")
    sys.stdout.write(f"\nACCEPTANCE criterion {int(match.group(1)):02d}: {status}\n")
    sys.stdout.flush()
