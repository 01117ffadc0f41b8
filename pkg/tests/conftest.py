import datetime as dt

import numpy as np
import pytest

from xrltrade.market_data import OhlcvBar, PriceSeries


def series_from_closes(closes, start=dt.date(2020, 1, 1), ticker="TEST", spread=0.0):
    """Daily bars whose open is the previous close; high/low envelope the body."""
    bars = []
    prev = closes[0]
    for i, c in enumerate(closes):
        o = prev
        bars.append(
            OhlcvBar(start + dt.timedelta(days=i), float(o), float(max(o, c) + spread), float(min(o, c) - spread),
                     float(c), 1000)
        )
        prev = c
    return PriceSeries(ticker, tuple(bars))


def alternating_closes(n, low=100.0, high=101.0):
    return [low if i % 2 == 0 else high for i in range(n)]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ---- acceptance report -----------------------------------------------------
# Each acceptance test carries ``@pytest.mark.acceptance(n, "title")``; the
# summary hook prints one PASS/FAIL line per criterion with its runtime.

_ACCEPTANCE = {}


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("acceptance")
    if marker is None or call.when not in ("setup", "call"):
        return
    number, title = marker.args
    entry = _ACCEPTANCE.setdefault(number, {"title": title, "ok": True, "seconds": 0.0})
    entry["seconds"] += call.duration
    if call.excinfo is not None:
        entry["ok"] = False


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        e = _ACCEPTANCE[number]
        status = "PASS" if e["ok"] else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {status}  {e['title']}  ({e['seconds']:.1f} s)")
