"""Candlestick series, relative-return transforms, and descriptive statistics.

Returns are relative price changes, Return(d+1) = field(d+1) / field(d) - 1,
and prices are recovered with price(d+1) = (Return(d+1) + 1) * price(d).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ._io import as_text

RETURN_FIELDS = ("close", "open", "high", "low")


class MarketDataError(ValueError):
    """Invalid candle data or an operation on it."""


class CandleParseError(MarketDataError):
    """Malformed candle input; carries the 1-based line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class Candle:
    """One trading session: open/high/low/close prices, all positive."""

    date: date
    open: float
    high: float
    low: float
    close: float

    def __post_init__(self):
        prices = (self.open, self.high, self.low, self.close)
        if not all(np.isfinite(p) and p > 0 for p in prices):
            raise MarketDataError(f"{self.date}: prices must be finite and > 0, got {prices}")
        if self.low > min(self.open, self.close):
            raise MarketDataError(f"{self.date}: low {self.low} above min(open, close)")
        if self.high < max(self.open, self.close):
            raise MarketDataError(f"{self.date}: high {self.high} below max(open, close)")

    def field(self, name: str) -> float:
        if name not in RETURN_FIELDS:
            raise MarketDataError(f"unknown price field {name!r}")
        return getattr(self, name)


@dataclass(frozen=True)
class CandleSeries:
    """Per-ticker bars, strictly increasing by date, never empty."""

    ticker: str
    bars: tuple[Candle, ...]

    def __post_init__(self):
        if not self.bars:
            raise MarketDataError(f"{self.ticker}: empty candle series")
        dates = [b.date for b in self.bars]
        for a, b in zip(dates, dates[1:]):
            if a >= b:
                raise MarketDataError(f"{self.ticker}: dates not strictly increasing at {b}")

    def __len__(self) -> int:
        return len(self.bars)

    @property
    def dates(self) -> tuple[date, ...]:
        return tuple(b.date for b in self.bars)

    def field_values(self, field: str) -> np.ndarray:
        return np.array([b.field(field) for b in self.bars], dtype=np.float64)


@dataclass(frozen=True)
class ReturnSeries:
    """Relative changes of one OHLC field; values[i] belongs to dates[i]."""

    ticker: str
    field: str
    dates: tuple[date, ...]
    values: np.ndarray

    def __post_init__(self):
        if len(self.dates) != len(self.values):
            raise MarketDataError("dates/values length mismatch")

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class SeriesStats:
    mean: float
    std: float
    min: float
    max: float
    q25: float
    q50: float
    q75: float


def parse_candles(stream, ticker: str, fmt: str = "csv") -> CandleSeries:
    """Parse a candle byte/text stream into a CandleSeries.

    CSV layout: header ``date,open,high,low,close``, ISO-8601 dates, ``.``
    decimals, UTF-8. Rows may arrive unsorted; duplicate dates are rejected.
    """
    if fmt != "csv":
        raise MarketDataError(f"unknown candle format {fmt!r}")
    text = as_text(stream)
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None:
        raise MarketDataError(f"{ticker}: empty candle file")
    expected = ["date", "open", "high", "low", "close"]
    if [h.strip().lower() for h in header] != expected:
        raise CandleParseError(1, f"expected header {','.join(expected)}, got {','.join(header)}")

    bars: list[Candle] = []
    seen: dict[date, int] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 5:
            raise CandleParseError(lineno, f"expected 5 fields, got {len(row)}")
        try:
            d = date.fromisoformat(row[0].strip())
        except ValueError as exc:
            raise CandleParseError(lineno, f"unparseable date {row[0]!r}") from exc
        try:
            o, h, lo, c = (float(v) for v in row[1:5])
        except ValueError as exc:
            raise CandleParseError(lineno, f"unparseable price in {row[1:5]}") from exc
        if d in seen:
            raise CandleParseError(lineno, f"duplicate date {d} (first seen on line {seen[d]})")
        seen[d] = lineno
        try:
            bars.append(Candle(date=d, open=o, high=h, low=lo, close=c))
        except MarketDataError as exc:
            raise CandleParseError(lineno, str(exc)) from exc

    if not bars:
        raise MarketDataError(f"{ticker}: no candle rows")
    bars.sort(key=lambda b: b.date)
    return CandleSeries(ticker=ticker, bars=tuple(bars))


def load_candles(path: str | Path) -> CandleSeries:
    """Load ``<TICKER>.csv``; the ticker is the filename stem."""
    path = Path(path)
    with open(path, "rb") as fh:
        return parse_candles(fh, ticker=path.stem)


def compute_returns(series: CandleSeries, field: str = "close") -> ReturnSeries:
    """Relative changes of one field; value for date d+1 is field(d+1)/field(d) - 1."""
    if len(series) < 2:
        raise MarketDataError(f"{series.ticker}: need >= 2 bars to compute returns")
    prices = series.field_values(field)
    values = prices[1:] / prices[:-1] - 1.0
    return ReturnSeries(
        ticker=series.ticker, field=field, dates=series.dates[1:], values=values
    )


def reconstruct_prices(returns: ReturnSeries | Sequence[float], anchor_price: float) -> np.ndarray:
    """Compound returns back into prices: price[i] = (returns[i] + 1) * price[i-1].

    The anchor is the price preceding the first return and is not part of the
    output. Accepts a ReturnSeries or any return sequence.
    """
    if not (np.isfinite(anchor_price) and anchor_price > 0):
        raise MarketDataError(f"anchor price must be finite and > 0, got {anchor_price}")
    values = np.asarray(getattr(returns, "values", returns), dtype=np.float64)
    return anchor_price * np.cumprod(values + 1.0)


def describe(values: Iterable[float]) -> SeriesStats:
    """Mean, sample std (n-1), min/max, and linearly interpolated quartiles."""
    arr = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=np.float64)
    if arr.size == 0:
        raise MarketDataError("describe: empty input")
    q25, q50, q75 = np.quantile(arr, [0.25, 0.5, 0.75], method="linear")
    std = float(np.std(arr, ddof=1)) if arr.size > 1 else 0.0
    return SeriesStats(
        mean=float(np.mean(arr)),
        std=std,
        min=float(np.min(arr)),
        max=float(np.max(arr)),
        q25=float(q25),
        q50=float(q50),
        q75=float(q75),
    )
