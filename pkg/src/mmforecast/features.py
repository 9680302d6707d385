"""Feature assembly: align news to trading days, build 20-feature return rows
(optionally fused with an aggregated news vector), and split by date.

FTR1 dataset layout (little-endian):

    magic  b"FTR1"
    u32    version (1)
    u64    row count
    per row:
        u16  ticker byte length, then UTF-8 ticker
        i32  target date as days since 1970-01-01
        20   f64 price-return features (field-major: closes, opens, highs, lows)
        u32  news dim (0 = single modality)
        dim  f32 news values
        f64  target return
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from datetime import date, datetime, time, timedelta
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from ._io import (
    ByteReader,
    as_bytes,
    pack_f32_array,
    pack_f64,
    pack_f64_array,
    pack_i32,
    pack_str16,
    pack_u32,
    pack_u64,
)
from .embedding import AggregationMode, EmbeddingProvider, aggregate, zero_vector
from .marketdata import RETURN_FIELDS, ReturnSeries

FTR_MAGIC = b"FTR1"

PRICE_WINDOW = 5
PRICE_FEATURES = len(RETURN_FIELDS) * PRICE_WINDOW  # 20

_EPOCH = date(1970, 1, 1)


class FeatureError(ValueError):
    """Invalid alignment, assembly, or dataset file input."""


class MissingEmbeddingError(FeatureError):
    """An aligned article has no vector in the provider."""


@dataclass(frozen=True)
class AlignmentConfig:
    """Market-open boundary and the price-return window length."""

    market_open: time = time(10, 0)
    window: int = PRICE_WINDOW

    def __post_init__(self):
        if self.window < 1:
            raise FeatureError(f"window must be >= 1, got {self.window}")


@dataclass(frozen=True)
class FeatureRow:
    """One training example: 20 return features, optional news vector, target return."""

    ticker: str
    target_date: date
    x_price: np.ndarray
    x_news: np.ndarray | None
    y: float

    def __post_init__(self):
        x_price = np.asarray(self.x_price, dtype=np.float64)
        if x_price.shape != (PRICE_FEATURES,):
            raise FeatureError(
                f"x_price must have exactly {PRICE_FEATURES} values, got {x_price.shape}"
            )
        object.__setattr__(self, "x_price", x_price)
        if self.x_news is not None:
            x_news = np.asarray(self.x_news, dtype=np.float64)
            if x_news.ndim != 1 or x_news.size == 0:
                raise FeatureError("x_news must be a non-empty 1-D vector")
            object.__setattr__(self, "x_news", x_news)
        if not np.isfinite(self.y):
            raise FeatureError(f"target return must be finite, got {self.y}")

    @property
    def news_dim(self) -> int:
        return 0 if self.x_news is None else int(self.x_news.shape[0])

    def feature_vector(self) -> np.ndarray:
        """Flat model input: price features followed by the news vector, if any."""
        if self.x_news is None:
            return self.x_price.copy()
        return np.concatenate([self.x_price, self.x_news])


def align_news(
    calendar: Sequence[date],
    articles: Iterable[tuple[str, datetime]],
    config: AlignmentConfig | None = None,
) -> dict[date, tuple[str, ...]]:
    """Assign article ids to the target trading day they may inform.

    For target day d with previous trading day p, the window is
    [open(p), open(d)): everything published after p's open and strictly
    before d's open — including weekend/holiday timestamps in between —
    belongs to d. Articles published at or after the last open (or before the
    first) are assigned to no target.
    """
    config = config or AlignmentConfig()
    calendar = sorted(calendar)
    if len(set(calendar)) != len(calendar):
        raise FeatureError("calendar contains duplicate dates")
    opens = [datetime.combine(d, config.market_open) for d in calendar]

    assigned: dict[date, list[tuple[datetime, str]]] = {d: [] for d in calendar[1:]}
    for article_id, ts in articles:
        # First open strictly after ts marks the target day; idx 0 (before the
        # first open) and idx len(opens) (at/after the last) have no target.
        idx = bisect.bisect_right(opens, ts)
        if 1 <= idx < len(opens):
            assigned[calendar[idx]].append((ts, article_id))
    return {
        d: tuple(article_id for _, article_id in sorted(items))
        for d, items in assigned.items()
    }


def build_rows(
    returns: Mapping[str, ReturnSeries],
    news: Mapping[date, Sequence[str]] | None,
    provider: EmbeddingProvider | None,
    mode: AggregationMode,
    modality: str,
    config: AlignmentConfig | None = None,
) -> list[FeatureRow]:
    """Assemble feature rows from per-field return series.

    x_price stacks the window's returns field-major (closes, opens, highs,
    lows); y is the close return on the target date. Dual modality appends
    the aggregated news vector for the target date, or a zero vector when no
    article was assigned. A missing embedding raises rather than skipping so
    train/test stay comparable.
    """
    config = config or AlignmentConfig()
    if modality not in ("single", "dual"):
        raise FeatureError(f"modality must be single or dual, got {modality!r}")
    missing = [f for f in RETURN_FIELDS if f not in returns]
    if missing:
        raise FeatureError(f"missing return series for fields {missing}")
    close = returns["close"]
    for f in RETURN_FIELDS:
        if returns[f].dates != close.dates:
            raise FeatureError(f"return series dates for {f!r} do not match close")
    window = config.window
    if len(close) < window + 1:
        raise FeatureError(
            f"{close.ticker}: need at least {window + 1} return observations, have {len(close)}"
        )
    if modality == "dual":
        if provider is None:
            raise FeatureError("dual modality requires an embedding provider")
        news = news or {}

    rows = []
    values = {f: returns[f].values for f in RETURN_FIELDS}
    for j in range(window, len(close)):
        target_date = close.dates[j]
        x_price = np.concatenate([values[f][j - window : j] for f in RETURN_FIELDS])
        x_news = None
        if modality == "dual":
            ids = news.get(target_date, ())
            if ids:
                vectors = []
                for article_id in ids:
                    if article_id not in provider:
                        raise MissingEmbeddingError(
                            f"article {article_id!r} (target {target_date}) has no embedding"
                        )
                    vectors.extend(provider.vectors(article_id))
                x_news = aggregate(vectors, mode)
            else:
                x_news = zero_vector(provider.dim)
        rows.append(
            FeatureRow(
                ticker=close.ticker,
                target_date=target_date,
                x_price=x_price,
                x_news=x_news,
                y=float(values["close"][j]),
            )
        )
    return rows


def split_by_date(
    rows: Sequence[FeatureRow], train_end: date, test_start: date
) -> tuple[list[FeatureRow], list[FeatureRow]]:
    """Partition rows by target date: train <= train_end, test >= test_start.

    Rows falling in a gap between the bounds are discarded (embargo support).
    """
    if train_end >= test_start:
        raise FeatureError(f"train_end {train_end} must precede test_start {test_start}")
    train = [r for r in rows if r.target_date <= train_end]
    test = [r for r in rows if r.target_date >= test_start]
    if not train:
        raise FeatureError(f"no rows on or before {train_end}")
    if not test:
        raise FeatureError(f"no rows on or after {test_start}")
    return train, test


def write_feature_file(path_or_stream, rows: Sequence[FeatureRow]) -> None:
    payload = bytearray()
    payload += FTR_MAGIC
    payload += pack_u32(1)
    payload += pack_u64(len(rows))
    for row in rows:
        payload += pack_str16(row.ticker)
        payload += pack_i32((row.target_date - _EPOCH).days)
        payload += pack_f64_array(row.x_price)
        payload += pack_u32(row.news_dim)
        if row.x_news is not None:
            payload += pack_f32_array(row.x_news)
        payload += pack_f64(row.y)
    if isinstance(path_or_stream, (str, Path)):
        Path(path_or_stream).write_bytes(bytes(payload))
    else:
        path_or_stream.write(bytes(payload))


def read_feature_file(path_or_stream) -> list[FeatureRow]:
    if isinstance(path_or_stream, (str, Path)):
        data = Path(path_or_stream).read_bytes()
    else:
        data = as_bytes(path_or_stream)
    reader = ByteReader(data)
    magic = reader.read(4)
    if magic != FTR_MAGIC:
        raise FeatureError(f"bad magic {magic!r}, expected {FTR_MAGIC!r}")
    version = reader.u32()
    if version != 1:
        raise FeatureError(f"unsupported dataset version {version}")
    count = reader.u64()
    rows = []
    for _ in range(count):
        ticker = reader.str16()
        target_date = _EPOCH + timedelta(days=reader.i32())
        x_price = reader.f64_array(PRICE_FEATURES)
        news_dim = reader.u32()
        x_news = reader.f32_array(news_dim).astype(np.float64) if news_dim else None
        y = reader.f64()
        rows.append(
            FeatureRow(ticker=ticker, target_date=target_date, x_price=x_price, x_news=x_news, y=y)
        )
    if not reader.at_end():
        raise FeatureError(f"{len(data) - reader.offset} trailing bytes in dataset file")
    return rows
