import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmforecast.marketdata import (
    Candle,
    CandleParseError,
    CandleSeries,
    MarketDataError,
    compute_returns,
    describe,
    load_candles,
    parse_candles,
    reconstruct_prices,
)

CSV_HEADER = "date,open,high,low,close\n"


def make_series(closes, ticker="T"):
    from datetime import date, timedelta

    bars = []
    for i, close in enumerate(closes):
        d = date(2022, 7, 7) + timedelta(days=i)
        bars.append(Candle(date=d, open=close, high=close, low=close, close=close))
    return CandleSeries(ticker=ticker, bars=tuple(bars))


class TestParseCandles:
    def test_single_row_field_mapping(self):
        series = parse_candles(CSV_HEADER + "2022-07-07,100,105,99,102\n", ticker="T")
        bar = series.bars[0]
        assert (bar.open, bar.high, bar.low, bar.close) == (100, 105, 99, 102)

    def test_duplicate_date_rejected(self):
        text = CSV_HEADER + "2022-07-07,100,105,99,102\n2022-07-07,1,2,1,2\n"
        with pytest.raises(CandleParseError, match="duplicate date"):
            parse_candles(text, ticker="T")

    def test_empty_file_rejected(self):
        with pytest.raises(MarketDataError, match="empty"):
            parse_candles("", ticker="T")
        with pytest.raises(MarketDataError, match="no candle rows"):
            parse_candles(CSV_HEADER, ticker="T")

    def test_rows_sorted_by_date(self):
        text = CSV_HEADER + "2022-07-08,1,2,1,2\n2022-07-07,1,2,1,2\n"
        series = parse_candles(text, ticker="T")
        assert [b.date.isoformat() for b in series.bars] == ["2022-07-07", "2022-07-08"]

    def test_malformed_row_reports_line(self):
        text = CSV_HEADER + "2022-07-07,100,105,99,102\n2022-07-08,oops,2,1,2\n"
        with pytest.raises(CandleParseError, match="line 3"):
            parse_candles(text, ticker="T")

    def test_non_positive_price_rejected(self):
        with pytest.raises(CandleParseError, match="> 0"):
            parse_candles(CSV_HEADER + "2022-07-07,0,1,0,1\n", ticker="T")

    def test_unparseable_date(self):
        with pytest.raises(CandleParseError, match="unparseable date"):
            parse_candles(CSV_HEADER + "07/07/2022,1,2,1,2\n", ticker="T")

    def test_low_high_invariants(self):
        with pytest.raises(CandleParseError, match="low"):
            parse_candles(CSV_HEADER + "2022-07-07,100,105,101,102\n", ticker="T")
        with pytest.raises(CandleParseError, match="high"):
            parse_candles(CSV_HEADER + "2022-07-07,100,101,99,102\n", ticker="T")

    def test_load_candles_uses_filename_stem(self, tmp_path):
        path = tmp_path / "SMLT.csv"
        path.write_text(CSV_HEADER + "2022-07-07,100,105,99,102\n")
        assert load_candles(path).ticker == "SMLT"


class TestComputeReturns:
    def test_basic(self):
        returns = compute_returns(make_series([100.0, 102.0]))
        assert returns.values == pytest.approx([0.02])

    def test_index_period_change_rounds_to_published_percent(self):
        # 2213.81 -> 2650.32 is the +19.72% move.
        returns = compute_returns(make_series([2213.81, 2650.32]))
        assert round(100 * returns.values[0], 2) == 19.72
        assert returns.values[0] == pytest.approx(2650.32 / 2213.81 - 1.0, rel=1e-12)

    def test_constant_series(self):
        returns = compute_returns(make_series([50.0, 50.0, 50.0]))
        assert returns.values == pytest.approx([0.0, 0.0])

    def test_needs_two_bars(self):
        with pytest.raises(MarketDataError, match=">= 2 bars"):
            compute_returns(make_series([100.0]))

    def test_dates_attach_to_later_bar(self):
        series = make_series([1.0, 2.0, 3.0])
        returns = compute_returns(series)
        assert returns.dates == series.dates[1:]

    def test_other_fields(self):
        series = parse_candles(
            CSV_HEADER + "2022-07-07,100,110,90,102\n2022-07-08,105,115,95,104\n", ticker="T"
        )
        assert compute_returns(series, "open").values == pytest.approx([0.05])
        assert compute_returns(series, "low").values == pytest.approx([95 / 90 - 1])


class TestReconstructPrices:
    def test_single_step(self):
        assert reconstruct_prices([0.02], 100.0) == pytest.approx([102.0])

    def test_identity(self):
        assert reconstruct_prices([0.0, 0.0, 0.0], 7.0) == pytest.approx([7.0, 7.0, 7.0])

    def test_bad_anchor(self):
        with pytest.raises(MarketDataError, match="anchor"):
            reconstruct_prices([0.1], 0.0)
        with pytest.raises(MarketDataError, match="anchor"):
            reconstruct_prices([0.1], -3.0)

    def test_roundtrip_fixed_series(self):
        closes = [100.0, 101.5, 99.25, 107.0, 104.1]
        returns = compute_returns(make_series(closes))
        rebuilt = reconstruct_prices(returns, closes[0])
        np.testing.assert_allclose(rebuilt, closes[1:], rtol=1e-9)

    @settings(max_examples=100, deadline=None)
    @given(
        st.lists(st.floats(min_value=0.01, max_value=1e5), min_size=2, max_size=60)
    )
    def test_roundtrip_property(self, closes):
        returns = compute_returns(make_series(closes))
        assert np.all(returns.values > -1.0)
        rebuilt = reconstruct_prices(returns, closes[0])
        np.testing.assert_allclose(rebuilt, closes[1:], rtol=1e-9)


class TestDescribe:
    def test_symmetric_set(self):
        stats = describe([1, 2, 3, 4, 5])
        assert (stats.mean, stats.q50, stats.min, stats.max) == (3, 3, 1, 5)

    def test_single_value(self):
        stats = describe([4.2])
        assert stats.mean == stats.min == stats.max == stats.q25 == stats.q50 == stats.q75 == 4.2
        assert stats.std == 0.0

    def test_linear_interpolation_quartile(self):
        assert describe([1, 2, 3, 4]).q25 == pytest.approx(1.75)

    def test_sample_std(self):
        # n-1 denominator: [1, 2, 3] -> std 1.
        assert describe([1, 2, 3]).std == pytest.approx(1.0)

    def test_empty_rejected(self):
        with pytest.raises(MarketDataError, match="empty"):
            describe([])

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(min_value=-1e6, max_value=1e6), min_size=1, max_size=50))
    def test_quartile_ordering(self, values):
        stats = describe(values)
        assert stats.min <= stats.q25 <= stats.q50 <= stats.q75 <= stats.max
        assert stats.std >= 0.0
