import datetime as dt

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xrltrade import fixture_path
from xrltrade.errors import ConfigError, DataError, FormatError, RowError
from xrltrade.market_data import (
    DEFAULT_SPLIT,
    OhlcvBar,
    PriceSeries,
    SplitSpec,
    clean_and_sort,
    parse_csv,
    read_csv,
    split_by_date,
    to_csv,
)

HEADER = "Date,Open,High,Low,Close,Adj Close,Volume\n"


def test_header_only_gives_empty_series():
    assert len(parse_csv(HEADER)) == 0


def test_single_row_without_adj_close():
    s = parse_csv("Date,Open,High,Low,Close,Volume\n2021-06-01,100.0,110.0,95.0,105.0,1000\n")
    (bar,) = s.bars
    assert bar == OhlcvBar(dt.date(2021, 6, 1), 100.0, 110.0, 95.0, 105.0, 1000)
    assert not bar.missing


def test_null_row_is_flagged_not_dropped():
    text = HEADER + (
        "2020-01-01,1,2,0.5,1.5,1.5,10\n"
        "2020-01-02,1,2,0.5,null,null,10\n"
        "2020-01-03,1,2,0.5,1.5,1.5,10\n"
        "2020-01-06,1,2,0.5,1.5,1.5,10\n"
    )
    s = parse_csv(text)
    assert len(s) == 4
    assert [b.missing for b in s.bars] == [False, True, False, False]


def test_crlf_and_column_order():
    text = "Volume,Close,Date,Low,High,Open\r\n7,105,2021-06-01,95,110,100\r\n"
    (bar,) = parse_csv(text).bars
    assert (bar.open, bar.high, bar.low, bar.close, bar.volume) == (100, 110, 95, 105, 7)


@pytest.mark.parametrize("header", ["Date,Open,High,Low,Close\n", "", "foo,bar\n"])
def test_malformed_header(header):
    with pytest.raises(FormatError):
        parse_csv(header + "2021-06-01,1,2,0.5,1.5\n")


def test_bad_number_reports_line():
    text = HEADER + "2020-01-01,1,2,0.5,1.5,1.5,10\n2020-01-02,1,abc,0.5,1.5,1.5,10\n"
    with pytest.raises(RowError) as err:
        parse_csv(text)
    assert err.value.line == 3


def test_bad_date_reports_line():
    with pytest.raises(RowError) as err:
        parse_csv(HEADER + "01/02/2020,1,2,0.5,1.5,1.5,10\n")
    assert err.value.line == 2


def _bar(day, close=10.0, missing=False):
    return OhlcvBar(dt.date(2020, 1, day), close, close + 1, close - 1, close, 5, missing)


def test_clean_sorts():
    s = PriceSeries("X", (_bar(3), _bar(1), _bar(2)))
    assert [b.date.day for b in clean_and_sort(s).bars] == [1, 2, 3]


def test_clean_drops_missing():
    s = PriceSeries("X", (_bar(1), _bar(2, missing=True), _bar(3), _bar(4, missing=True), _bar(5)))
    assert [b.date.day for b in clean_and_sort(s).bars] == [1, 3, 5]


def test_clean_drops_impossible_prices():
    bad = OhlcvBar(dt.date(2020, 1, 2), 10.0, 9.0, 8.0, 10.0, 5)  # high below open
    s = PriceSeries("X", (_bar(1), bad, _bar(3)))
    assert len(clean_and_sort(s)) == 2


def test_clean_rejects_duplicate_dates():
    s = PriceSeries("X", (_bar(1), _bar(2), _bar(2, close=11.0)))
    with pytest.raises(DataError, match="2020-01-02"):
        clean_and_sort(s)


def test_default_split_dates():
    assert DEFAULT_SPLIT == SplitSpec(dt.date(2014, 1, 1), dt.date(2021, 5, 31), dt.date(2021, 6, 1), dt.date(2022, 6, 21))


def test_split_spec_ordering():
    with pytest.raises(ConfigError):
        SplitSpec(dt.date(2020, 1, 5), dt.date(2020, 1, 1), dt.date(2020, 2, 1), dt.date(2020, 3, 1))


def test_split_boundary_six_four():
    s = PriceSeries("X", tuple(_bar(d) for d in range(1, 11)))
    spec = SplitSpec(dt.date(2020, 1, 1), dt.date(2020, 1, 6), dt.date(2020, 1, 7), dt.date(2020, 1, 31))
    train, test = split_by_date(s, spec)
    assert (len(train), len(test)) == (6, 4)


def test_split_before_train_start_is_config_error():
    s = PriceSeries("X", tuple(_bar(d) for d in range(1, 5)))
    with pytest.raises(ConfigError):
        split_by_date(s)


def test_csv_round_trip():
    s = clean_and_sort(read_csv(fixture_path()))
    assert parse_csv(to_csv(s), s.ticker) == s


def test_fixture_partitions():
    s = clean_and_sort(read_csv(fixture_path()))
    train, test = split_by_date(s)
    assert len(s) == 903  # 906 business days less three null rows
    assert train.bars[-1].date <= dt.date(2021, 5, 31) < test.bars[0].date


bars = st.builds(
    lambda day, close, missing: _bar_any(day, close, missing),
    st.integers(0, 60),
    st.floats(1.0, 1000.0),
    st.booleans(),
)


def _bar_any(day, close, missing):
    return OhlcvBar(dt.date(2020, 1, 1) + dt.timedelta(days=day), close, close * 1.01, close * 0.99, close, 1, missing)


@settings(max_examples=200, deadline=None)
@given(st.lists(bars, max_size=30, unique_by=lambda b: b.date))
def test_clean_is_idempotent_and_sorted(items):
    once = clean_and_sort(PriceSeries("X", tuple(items)))
    assert clean_and_sort(once) == once
    dates = once.dates
    assert all(a < b for a, b in zip(dates, dates[1:]))
    assert all(b.is_valid() for b in once.bars)


@settings(max_examples=100, deadline=None)
@given(st.lists(bars, min_size=1, max_size=40, unique_by=lambda b: b.date), st.integers(0, 59))
def test_split_partitions_disjoint_and_sorted(items, cut):
    s = clean_and_sort(PriceSeries("X", tuple(items)))
    start = dt.date(2020, 1, 1)
    spec = SplitSpec(start, start + dt.timedelta(cut), start + dt.timedelta(cut + 1), start + dt.timedelta(70))
    try:
        train, test = split_by_date(s, spec)
    except ConfigError:
        return
    assert not set(train.dates) & set(test.dates)
    for part in (train, test):
        assert part.dates == sorted(part.dates)
