"""Daily OHLCV ingestion: parse a Yahoo-style CSV export, clean it, split it by date."""

from __future__ import annotations

import csv
import datetime as dt
import io
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, FormatError, RowError

log = logging.getLogger(__name__)

REQUIRED_COLUMNS = ("Date", "Open", "High", "Low", "Close", "Volume")
MISSING_TOKENS = {"", "null", "NULL", "Null"}


@dataclass(frozen=True)
class OhlcvBar:
    date: dt.date
    open: float
    high: float
    low: float
    close: float
    volume: int
    missing: bool = False

    def is_valid(self) -> bool:
        """True when prices are positive and the low/high envelope holds."""
        if self.missing:
            return False
        prices = (self.open, self.high, self.low, self.close)
        if not all(math.isfinite(p) and p > 0 for p in prices):
            return False
        if self.volume < 0:
            return False
        return self.low <= min(self.open, self.close) and self.high >= max(self.open, self.close)


@dataclass(frozen=True)
class PriceSeries:
    ticker: str
    bars: tuple[OhlcvBar, ...] = field(default_factory=tuple)

    def __len__(self) -> int:
        return len(self.bars)

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            return PriceSeries(self.ticker, self.bars[idx])
        return self.bars[idx]

    @property
    def dates(self) -> list[dt.date]:
        return [b.date for b in self.bars]

    @property
    def closes(self) -> np.ndarray:
        return np.array([b.close for b in self.bars], dtype=np.float64)

    def ohlc(self) -> np.ndarray:
        """(n, 4) float array with columns open, high, low, close."""
        if not self.bars:
            return np.empty((0, 4))
        return np.array([(b.open, b.high, b.low, b.close) for b in self.bars], dtype=np.float64)

    def index_of(self, date: dt.date) -> int:
        for i, b in enumerate(self.bars):
            if b.date == date:
                return i
        raise KeyError(date)


@dataclass(frozen=True)
class SplitSpec:
    train_start: dt.date
    train_end: dt.date
    test_start: dt.date
    test_end: dt.date

    def __post_init__(self):
        if not (self.train_start <= self.train_end < self.test_start <= self.test_end):
            raise ConfigError(
                "split dates must satisfy train_start <= train_end < test_start <= test_end"
            )


DEFAULT_SPLIT = SplitSpec(
    train_start=dt.date(2014, 1, 1),
    train_end=dt.date(2021, 5, 31),
    test_start=dt.date(2021, 6, 1),
    test_end=dt.date(2022, 6, 21),
)


def parse_date(text: str) -> dt.date:
    return dt.date.fromisoformat(text.strip())


def _parse_price(cell: str, line: int, name: str) -> float | None:
    cell = cell.strip()
    if cell in MISSING_TOKENS:
        return None
    try:
        value = float(cell)
    except ValueError:
        raise RowError(line, f"unparseable {name} value {cell!r}") from None
    if not math.isfinite(value):
        raise RowError(line, f"non-finite {name} value {cell!r}")
    return value


def _parse_volume(cell: str, line: int) -> int | None:
    value = _parse_price(cell, line, "Volume")
    if value is None:
        return None
    if not value.is_integer():
        raise RowError(line, f"Volume must be an integer, got {cell.strip()!r}")
    return int(value)


def parse_csv(raw_text: str | io.TextIOBase, ticker: str = "") -> PriceSeries:
    """Parse a Yahoo Finance CSV export into bars in file order.

    Cells that are empty or ``null`` mark the whole row as missing; such rows
    are kept (with NaN prices) so that :func:`clean_and_sort` can drop them.
    An ``Adj Close`` column is accepted and ignored.
    """
    if not isinstance(raw_text, str):
        raw_text = raw_text.read()
    if raw_text.startswith("\ufeff"):
        raw_text = raw_text[1:]
    reader = csv.reader(io.StringIO(raw_text, newline=""))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise FormatError("empty input: missing header line") from None
    missing_cols = [c for c in REQUIRED_COLUMNS if c not in header]
    if missing_cols:
        raise FormatError(f"malformed header, missing columns: {', '.join(missing_cols)}")
    col = {name: header.index(name) for name in REQUIRED_COLUMNS}

    bars = []
    for line_no, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise RowError(line_no, f"expected {len(header)} fields, got {len(row)}")
        try:
            date = parse_date(row[col["Date"]])
        except ValueError:
            raise RowError(line_no, f"unparseable date {row[col['Date']]!r}") from None
        prices = [_parse_price(row[col[k]], line_no, k) for k in ("Open", "High", "Low", "Close")]
        volume = _parse_volume(row[col["Volume"]], line_no)
        missing = volume is None or any(p is None for p in prices)
        o, h, lo, c = (math.nan if p is None else p for p in prices)
        bars.append(OhlcvBar(date, o, h, lo, c, -1 if volume is None else volume, missing))
    return PriceSeries(ticker, tuple(bars))


def read_csv(path, ticker: str | None = None) -> PriceSeries:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    return parse_csv(text, ticker if ticker is not None else path.stem)


def clean_and_sort(series: PriceSeries) -> PriceSeries:
    """Drop missing or impossible rows and sort ascending by date.

    Raises DataError if two surviving rows share a date.
    """
    kept = [b for b in series.bars if b.is_valid()]
    n_missing = sum(b.missing for b in series.bars)
    n_invalid = len(series.bars) - len(kept) - n_missing
    if n_missing or n_invalid:
        log.warning(
            "%s: dropped %d missing and %d invalid rows", series.ticker or "series", n_missing, n_invalid
        )
    kept.sort(key=lambda b: b.date)
    for prev, cur in zip(kept, kept[1:]):
        if prev.date == cur.date:
            raise DataError(f"duplicate date {cur.date.isoformat()}")
    return PriceSeries(series.ticker, tuple(kept))


def split_by_date(series: PriceSeries, spec: SplitSpec = DEFAULT_SPLIT) -> tuple[PriceSeries, PriceSeries]:
    train = tuple(b for b in series.bars if spec.train_start <= b.date <= spec.train_end)
    test = tuple(b for b in series.bars if spec.test_start <= b.date <= spec.test_end)
    if not train:
        raise ConfigError(f"empty training partition for {spec.train_start}..{spec.train_end}")
    if not test:
        raise ConfigError(f"empty test partition for {spec.test_start}..{spec.test_end}")
    return PriceSeries(series.ticker, train), PriceSeries(series.ticker, test)


def to_csv(series: PriceSeries) -> str:
    """Serialize in the Yahoo layout (without Adj Close); round-trips through parse_csv."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(REQUIRED_COLUMNS)
    for b in series.bars:
        writer.writerow([b.date.isoformat(), repr(b.open), repr(b.high), repr(b.low), repr(b.close), b.volume])
    return out.getvalue()
