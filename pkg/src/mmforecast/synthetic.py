"""Synthetic corpora and markets for tests, demos, and planted-truth experiments.

The paraphrase generator (token shuffle, 10% token dropout, field-swap
variant) is a fixture-grade stand-in for LLM-written rewrites, not a
linguistic claim. The planted market writes next-day returns as half an
AR(1) process and half a signal that is only visible in the previous day's
news text, so a dual-modality model has strictly more information than a
single-modality one.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, datetime, time, timedelta

import numpy as np

from .dedup import LabeledPair
from .marketdata import Candle, CandleSeries
from .newscorpus import CompanyRecord, NewsArticle

POSITIVE_WORDS = (
    "surge rally upgrade beat growth record expansion bullish profit boom soar gain"
).split()
NEGATIVE_WORDS = (
    "plunge selloff downgrade miss slump loss cutback bearish default crash drop fall"
).split()

_FILLER_VOCAB_SIZE = 2000


def filler_word(index: int) -> str:
    return f"filler{index:04d}"


def random_text(rng: np.random.Generator, n_tokens: int, vocab_size: int = _FILLER_VOCAB_SIZE) -> str:
    """Space-joined pseudo-words drawn uniformly from the filler vocabulary."""
    return " ".join(filler_word(i) for i in rng.integers(0, vocab_size, size=n_tokens))


def paraphrase(text: str, rng: np.random.Generator, dropout: float = 0.1) -> str:
    """Token shuffle plus dropout, always keeping at least one token."""
    tokens = text.split()
    keep = rng.random(len(tokens)) >= dropout
    if not keep.any():
        keep[rng.integers(0, len(tokens))] = True
    kept = [t for t, k in zip(tokens, keep) if k]
    rng.shuffle(kept)
    return " ".join(kept)


def paraphrase_article(article: NewsArticle, rng: np.random.Generator, count: int = 3) -> list[NewsArticle]:
    """Paraphrased copies: shuffled/dropped title and body; the last variant
    also swaps title and body."""
    variants = []
    for i in range(count):
        title, body = article.title, article.body
        if i == count - 1 and count > 1:
            title, body = body, title
        variants.append(
            NewsArticle(
                article_id=f"{article.article_id}-p{i + 1}",
                published_at=article.published_at + timedelta(minutes=17 * (i + 1)),
                source=article.source,
                title=paraphrase(title, rng),
                body=paraphrase(body, rng),
                tags=article.tags,
            )
        )
    return variants


def make_articles(
    rng: np.random.Generator,
    count: int,
    start: datetime = datetime(2023, 1, 2, 9, 0),
    spacing_minutes: int = 97,
    body_tokens: int = 40,
    prefix: str = "art",
    source: str = "synthetic",
) -> list[NewsArticle]:
    """Chronologically ordered originals with random filler bodies."""
    return [
        NewsArticle(
            article_id=f"{prefix}{i:04d}",
            published_at=start + timedelta(minutes=spacing_minutes * i),
            source=source,
            title=random_text(rng, 4),
            body=random_text(rng, body_tokens),
        )
        for i in range(count)
    ]


def make_pair_training_set(
    rng: np.random.Generator,
    n_originals: int = 120,
    paraphrases_per_original: int = 3,
) -> tuple[list[NewsArticle], list[LabeledPair]]:
    """Originals plus rewrites with equal-proportion duplicate/distinct pairs.

    Duplicate pairs join an article with one of its rewrites (random
    orientation); distinct pairs join unrelated originals. Field-swapped
    variants are excluded from duplicate pairs because scoring targets body
    text.
    """
    originals = make_articles(rng, n_originals)
    articles = list(originals)
    groups: list[list[NewsArticle]] = []
    for original in originals:
        variants = paraphrase_article(original, rng, count=paraphrases_per_original)
        articles.extend(variants)
        groups.append([original] + variants[:-1])  # last variant is the field swap

    duplicate_pairs: list[LabeledPair] = []
    for group in groups:
        for variant in group[1:]:
            a, b = (group[0], variant) if rng.random() < 0.5 else (variant, group[0])
            duplicate_pairs.append(LabeledPair(a.article_id, b.article_id, duplicate=True))

    distinct_pairs: list[LabeledPair] = []
    while len(distinct_pairs) < len(duplicate_pairs):
        i, j = rng.integers(0, n_originals, size=2)
        if i == j:
            continue
        distinct_pairs.append(
            LabeledPair(originals[i].article_id, originals[j].article_id, duplicate=False)
        )

    pairs = duplicate_pairs + distinct_pairs
    order = rng.permutation(len(pairs))
    return articles, [pairs[k] for k in order]


def make_planted_dedup_corpus(
    rng: np.random.Generator,
    n_originals: int = 50,
    start: datetime = datetime(2024, 2, 1, 9, 0),
) -> tuple[list[NewsArticle], int]:
    """Originals interleaved with one rewrite each, ordered chronologically.

    Every rewrite appears within hours of its original, inside a trailing
    3-day comparison window. Returns (articles, number of unique stories).
    """
    originals = make_articles(rng, n_originals, start=start, spacing_minutes=173, prefix="story")
    corpus: list[NewsArticle] = []
    for original in originals:
        rewrite = NewsArticle(
            article_id=f"{original.article_id}-rw",
            published_at=original.published_at + timedelta(minutes=61),
            source=original.source,
            title=paraphrase(original.title, rng),
            body=paraphrase(original.body, rng),
            tags=original.tags,
        )
        corpus.extend([original, rewrite])
    corpus.sort(key=lambda a: (a.published_at, a.article_id))
    return corpus, n_originals


@dataclass(frozen=True)
class PlantedDataset:
    """Synthetic market where news carries half of the next-day return."""

    series: dict[str, CandleSeries]
    articles: list[NewsArticle]
    registry: list[CompanyRecord]


def trading_days(start: date, sessions: int) -> list[date]:
    """Consecutive weekdays beginning at the first weekday on/after start."""
    days = []
    current = start
    while len(days) < sessions:
        if current.weekday() < 5:
            days.append(current)
        current += timedelta(days=1)
    return days


def make_planted_dataset(
    seed: int,
    tickers: tuple[str, ...] = ("ALFA", "BETA"),
    sessions: int = 600,
    start: date = date(2022, 7, 7),
    ar_coeff: float = 0.6,
    ar_std: float = 0.008,
    signal_scale: float = 0.012,
    noise_std: float = 0.002,
    extra_article_rate: float = 0.15,
    missing_news_rate: float = 0.05,
    signal_tokens: int = 12,
    filler_tokens: int = 4,
) -> PlantedDataset:
    """Two-component return process with the signal half encoded in news.

    return(d) = 0.5 * ar(d) + 0.5 * sign(d) * signal_scale + noise, where
    sign(d) is published as positive/negative vocabulary in articles tagged
    with the ticker on the previous trading day at 14:00. A small fraction of
    days gets a second article or none at all.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    days = trading_days(start, sessions)
    publish_time = time(14, 0)

    series: dict[str, CandleSeries] = {}
    articles: list[NewsArticle] = []
    registry: list[CompanyRecord] = []

    for ticker in tickers:
        ar_innovation_std = ar_std * np.sqrt(1.0 - ar_coeff**2)
        ar = np.zeros(sessions)
        for t in range(1, sessions):
            ar[t] = ar_coeff * ar[t - 1] + rng.normal(0.0, ar_innovation_std)
        signs = rng.choice([-1.0, 1.0], size=sessions)
        noise = rng.normal(0.0, noise_std, size=sessions)
        returns = 0.5 * ar + 0.5 * signs * signal_scale + noise  # index 0 unused

        closes = np.empty(sessions)
        closes[0] = 100.0 * (1.0 + rng.uniform(-0.1, 0.1))
        for t in range(1, sessions):
            closes[t] = closes[t - 1] * (1.0 + returns[t])

        bars = []
        for t in range(sessions):
            prev_close = closes[t - 1] if t else closes[0]
            open_price = prev_close * (1.0 + rng.normal(0.0, 0.002))
            body_high = max(open_price, closes[t])
            body_low = min(open_price, closes[t])
            bars.append(
                Candle(
                    date=days[t],
                    open=open_price,
                    high=body_high * (1.0 + abs(rng.normal(0.0, 0.002))),
                    low=body_low * (1.0 - abs(rng.normal(0.0, 0.002))),
                    close=closes[t],
                )
            )
        series[ticker] = CandleSeries(ticker=ticker, bars=tuple(bars))

        for t in range(1, sessions):
            if rng.random() < missing_news_rate:
                continue
            n_articles = 2 if rng.random() < extra_article_rate else 1
            vocab = POSITIVE_WORDS if signs[t] > 0 else NEGATIVE_WORDS
            for j in range(n_articles):
                words = [vocab[i] for i in rng.integers(0, len(vocab), size=signal_tokens)]
                words += random_text(rng, filler_tokens).split()
                rng.shuffle(words)
                articles.append(
                    NewsArticle(
                        article_id=f"{ticker}-d{t:04d}-{j}",
                        published_at=datetime.combine(days[t - 1], publish_time)
                        + timedelta(minutes=11 * j),
                        source="synthetic",
                        title=random_text(rng, 3),
                        body=" ".join(words),
                        tags=(ticker,),
                    )
                )

        registry.append(
            CompanyRecord(
                ticker=ticker,
                name=f"{ticker} Test Issuer",
                description=(
                    f"{ticker} synthetic issuer replaying desk data for "
                    f"integration checks of the {ticker.lower()} pipeline"
                ),
            )
        )

    articles.sort(key=lambda a: (a.published_at, a.article_id))
    return PlantedDataset(series=series, articles=articles, registry=registry)


def write_planted_dataset(dataset: PlantedDataset, root) -> dict[str, str]:
    """Materialize candles/news/registry files; returns the path map."""
    import json
    from pathlib import Path

    root = Path(root)
    candles_dir = root / "candles"
    candles_dir.mkdir(parents=True, exist_ok=True)
    for ticker, series in dataset.series.items():
        lines = ["date,open,high,low,close"]
        for bar in series.bars:
            lines.append(
                f"{bar.date.isoformat()},{float(bar.open)!r},{float(bar.high)!r},"
                f"{float(bar.low)!r},{float(bar.close)!r}"
            )
        (candles_dir / f"{ticker}.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    news_path = root / "news.jsonl"
    with open(news_path, "w", encoding="utf-8") as fh:
        for article in dataset.articles:
            fh.write(
                json.dumps(
                    {
                        "id": article.article_id,
                        "published_at": article.published_at.isoformat(),
                        "source": article.source,
                        "title": article.title,
                        "body": article.body,
                        "tags": list(article.tags),
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )

    registry_path = root / "registry.csv"
    lines = ["ticker,name,description"]
    for company in dataset.registry:
        lines.append(f'{company.ticker},{company.name},"{company.description}"')
    registry_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    return {
        "candles_dir": str(candles_dir),
        "news_file": str(news_path),
        "registry_file": str(registry_path),
    }
