"""End-to-end backtest: per-ticker data assembly, training, prediction, metrics.

Per-ticker work is independent and may fan out across worker threads; results
merge in ticker order and every source of randomness derives from the single
run seed, so identical configs rerun to byte-identical reports and the metric
values do not depend on the --jobs setting (only the echoed config records it).
"""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .config import PipelineConfig, config_to_dict
from .embedding import AggregationMode, EmbeddingProvider, read_embedding_file
from .evaluation import BacktestReport, MetricSet, average_metrics, metric_set
from .features import align_news, build_rows, split_by_date
from .marketdata import RETURN_FIELDS, CandleSeries, compute_returns, load_candles
from .models import LossCurves, fit_baseline, train_lstm
from .newscorpus import (
    NewsArticle,
    augment_keywords,
    load_keyword_supplement,
    load_news,
    load_registry,
    match_articles,
    tfidf_keywords,
)

log = logging.getLogger(__name__)


class BacktestError(ValueError):
    """Run-level backtest failure (per-ticker failures are recorded, not raised)."""


def derive_seed(master: int, *parts: str) -> int:
    """Deterministic per-ticker/model seed fan-out from the run seed."""
    digest = hashlib.blake2b(digest_size=8)
    digest.update(str(master).encode("utf-8"))
    for part in parts:
        digest.update(b"\x00" + part.encode("utf-8"))
    return int.from_bytes(digest.digest(), "little") % (2**31)


@dataclass
class _SharedInputs:
    """Data loaded once and shared read-only by every ticker worker."""

    corpus: list[NewsArticle] | None = None
    provider: EmbeddingProvider | None = None
    keywords: dict | None = None
    retained: set[str] | None = None


def _load_shared(config: PipelineConfig) -> _SharedInputs:
    shared = _SharedInputs()
    if config.modality != "dual":
        return shared
    shared.corpus = load_news(config.news_file)
    shared.provider = read_embedding_file(config.embedding_file)
    registry = load_registry(config.registry_file)
    keyword_sets = {ks.ticker: ks for ks in tfidf_keywords(registry, k=config.keywords_k)}
    if config.supplement_file:
        with open(config.supplement_file, "rb") as fh:
            supplement = load_keyword_supplement(fh)
        for ticker, extra in supplement.items():
            if ticker in keyword_sets:
                keyword_sets[ticker] = augment_keywords(keyword_sets[ticker], extra)
    shared.keywords = keyword_sets
    if config.retained_ids_file:
        text = Path(config.retained_ids_file).read_text(encoding="utf-8")
        shared.retained = {line.strip() for line in text.splitlines() if line.strip()}
    return shared


def _ticker_rows(config: PipelineConfig, shared: _SharedInputs, series: CandleSeries):
    returns = {f: compute_returns(series, f) for f in RETURN_FIELDS}
    news_map = None
    provider = None
    if config.modality == "dual":
        provider = shared.provider
        ticker = series.ticker
        if ticker not in shared.keywords:
            raise BacktestError(f"{ticker}: not present in the company registry")
        ids = match_articles(shared.corpus, shared.keywords[ticker], fields=config.match_fields)
        if shared.retained is not None:
            ids = [i for i in ids if i in shared.retained]
        by_id = {a.article_id: a for a in shared.corpus}
        articles = [(i, by_id[i].published_at) for i in ids]
        news_map = align_news(series.dates, articles, config.align)
    return build_rows(
        returns,
        news_map,
        provider,
        AggregationMode.parse(config.aggregation),
        config.modality,
        config.align,
    )


def _run_ticker(
    config: PipelineConfig, shared: _SharedInputs, ticker: str
) -> tuple[MetricSet, LossCurves | None]:
    series = load_candles(Path(config.candles_dir) / f"{ticker}.csv")
    if series.ticker != ticker:
        raise BacktestError(f"candle file ticker {series.ticker!r} != {ticker!r}")
    rows = _ticker_rows(config, shared, series)
    train_rows, test_rows = split_by_date(rows, config.train_end, config.test_start)

    seed = derive_seed(config.seed, ticker, config.model)
    curves = None
    if config.model == "lstm":
        train_config = replace(config.train, seed=seed)
        model, curves = train_lstm(train_rows, train_config, eval_rows=test_rows)
    else:
        params = dict(config.model_params)
        if config.model == "rf":
            params.setdefault("seed", seed)
        model = fit_baseline(config.model, train_rows, **params)

    x_test = np.stack([r.feature_vector() for r in test_rows])
    predicted = np.asarray(model.predict(x_test), dtype=np.float64).ravel()
    actual = np.array([r.y for r in test_rows])

    closes = series.field_values("close")
    index_of = {d: i for i, d in enumerate(series.dates)}
    previous_closes = np.array([closes[index_of[r.target_date] - 1] for r in test_rows])
    return metric_set(predicted, actual, previous_closes), curves


def run_backtest(config: PipelineConfig) -> BacktestReport:
    """Backtest every configured ticker; per-ticker failures are recorded and
    the report is still produced for the successes."""
    tickers = config.resolve_tickers()
    shared = _load_shared(config)

    echo = _jsonify(config_to_dict(config))
    if shared.provider is not None:
        echo["run"]["embedder_model_id"] = shared.provider.model_id
    report = BacktestReport(config=echo)

    def work(ticker: str):
        try:
            return ticker, _run_ticker(config, shared, ticker), None
        except Exception as exc:  # recorded per ticker, run continues
            log.warning("ticker %s failed: %s", ticker, exc)
            return ticker, None, f"{type(exc).__name__}: {exc}"

    if config.jobs > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            outcomes = list(pool.map(work, tickers))
    else:
        outcomes = [work(t) for t in tickers]

    for ticker, result, error in outcomes:  # already in ticker order
        if error is not None:
            report.failures[ticker] = error
            continue
        metrics, curves = result
        report.per_ticker[ticker] = metrics
        if curves is not None:
            report.curves[ticker] = curves
    if report.per_ticker:
        report.averaged = average_metrics(report.per_ticker)
    return report


def _jsonify(value):
    """Dates become ISO strings so the config echo is JSON-encodable."""
    if isinstance(value, dict):
        return {k: _jsonify(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonify(v) for v in value]
    if hasattr(value, "isoformat"):
        return value.isoformat()
    return value


def report_json_bytes(report: BacktestReport) -> bytes:
    """Canonical JSON encoding: sorted keys, fixed separators, repr floats."""
    return (
        json.dumps(report.to_json_dict(), sort_keys=True, indent=2, allow_nan=False)
        + "\n"
    ).encode("utf-8")
