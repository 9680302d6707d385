"""News corpus and company registry: parsing, TF-IDF keywords, article matching.

The corpus arrives as UTF-8 line-delimited JSON records with fields
``id, published_at, source, title, body, tags``; the company registry is a
CSV of ``ticker,name,description`` rows.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from collections import Counter
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from ._io import as_text
from .marketdata import SeriesStats, describe
from .text import tokenize

log = logging.getLogger(__name__)

NO_TITLE = "no title"

MATCH_FIELDS = ("title", "body", "tags")


class NewsCorpusError(ValueError):
    """Invalid corpus/registry data or an operation on it."""


class NewsParseError(NewsCorpusError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class NewsArticle:
    """One timestamped news record; missing titles carry the ``no title`` marker."""

    article_id: str
    published_at: datetime
    source: str
    title: str
    body: str
    tags: tuple[str, ...] = ()

    def text(self, field: str = "title_body") -> str:
        """Raw text of one scoring field: title, body, or title + newline + body."""
        if field == "title":
            return self.title
        if field == "body":
            return self.body
        if field == "title_body":
            return f"{self.title}\n{self.body}"
        raise NewsCorpusError(f"unknown text field {field!r}")


@dataclass(frozen=True)
class CompanyRecord:
    ticker: str
    name: str
    description: str


@dataclass(frozen=True)
class KeywordSet:
    """Lowercase keywords for one ticker, ordered by score then lexicographically."""

    ticker: str
    keywords: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.keywords)) != len(self.keywords):
            raise NewsCorpusError(f"{self.ticker}: duplicate keywords")


def parse_timestamp(raw: str) -> datetime:
    """ISO-8601 timestamp; date-only strings mean 00:00 exchange-local.

    Offset-aware inputs are converted to UTC and returned naive so the corpus
    stays comparable.
    """
    value = datetime.fromisoformat(raw.strip().replace("Z", "+00:00"))
    if value.tzinfo is not None:
        value = value.astimezone(timezone.utc).replace(tzinfo=None)
    return value


def parse_news(stream) -> list[NewsArticle]:
    """Parse line-delimited JSON into articles.

    Duplicate ids keep the first occurrence and log a warning; a missing title
    becomes ``no title``; missing tags become an empty tuple.
    """
    text = as_text(stream)
    articles: list[NewsArticle] = []
    seen: set[str] = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise NewsParseError(lineno, f"invalid JSON: {exc.msg}") from exc
        if not isinstance(rec, dict):
            raise NewsParseError(lineno, "record is not a JSON object")
        if "published_at" not in rec or rec["published_at"] in (None, ""):
            raise NewsParseError(lineno, "missing date")
        for key in ("id", "source", "body"):
            if key not in rec or rec[key] in (None, ""):
                raise NewsParseError(lineno, f"missing field {key!r}")
        try:
            published = parse_timestamp(str(rec["published_at"]))
        except ValueError as exc:
            raise NewsParseError(lineno, f"unparseable date {rec['published_at']!r}") from exc
        article_id = str(rec["id"])
        if article_id in seen:
            log.warning("duplicate article id %r on line %d rejected", article_id, lineno)
            continue
        seen.add(article_id)
        title = rec.get("title")
        tags = rec.get("tags") or []
        if not isinstance(tags, list):
            raise NewsParseError(lineno, "tags must be an array")
        articles.append(
            NewsArticle(
                article_id=article_id,
                published_at=published,
                source=str(rec["source"]),
                title=str(title) if title not in (None, "") else NO_TITLE,
                body=str(rec["body"]),
                tags=tuple(str(t) for t in tags),
            )
        )
    return articles


def load_news(path: str | Path) -> list[NewsArticle]:
    with open(path, "rb") as fh:
        return parse_news(fh)


def parse_registry(stream) -> list[CompanyRecord]:
    """Parse the ``ticker,name,description`` company registry CSV."""
    text = as_text(stream)
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None:
        raise NewsCorpusError("empty registry")
    if [h.strip().lower() for h in header] != ["ticker", "name", "description"]:
        raise NewsCorpusError(f"expected header ticker,name,description, got {','.join(header)}")
    records: list[CompanyRecord] = []
    seen: set[str] = set()
    for lineno, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 3:
            raise NewsParseError(lineno, f"expected 3 fields, got {len(row)}")
        ticker, name, description = (v.strip() for v in row)
        if not description:
            raise NewsParseError(lineno, f"{ticker}: empty description")
        if ticker in seen:
            raise NewsParseError(lineno, f"duplicate ticker {ticker}")
        seen.add(ticker)
        records.append(CompanyRecord(ticker=ticker, name=name, description=description))
    if not records:
        raise NewsCorpusError("registry has no rows")
    return records


def load_registry(path: str | Path) -> list[CompanyRecord]:
    with open(path, "rb") as fh:
        return parse_registry(fh)


def tfidf_keywords(registry: Sequence[CompanyRecord], k: int = 30) -> list[KeywordSet]:
    """Top-k description tokens per company by tf-idf.

    tf is the raw token count inside the description; idf is the smoothed
    ln((1 + N) / (1 + df)) + 1 over the registry's descriptions, so no score
    degenerates to zero. Ties break lexicographically.
    """
    if not registry:
        raise NewsCorpusError("empty registry")
    if k < 1:
        raise NewsCorpusError(f"k must be >= 1, got {k}")

    term_counts: list[Counter] = []
    for company in registry:
        tokens = tokenize(company.description)
        if not tokens:
            raise NewsCorpusError(f"{company.ticker}: description has no tokens")
        term_counts.append(Counter(tokens))

    n_docs = len(registry)
    df = Counter()
    for counts in term_counts:
        df.update(counts.keys())

    result = []
    for company, counts in zip(registry, term_counts):
        scored = [
            (tf * (math.log((1 + n_docs) / (1 + df[token])) + 1.0), token)
            for token, tf in counts.items()
        ]
        scored.sort(key=lambda st: (-st[0], st[1]))
        result.append(KeywordSet(ticker=company.ticker, keywords=tuple(t for _, t in scored[:k])))
    return result


def load_keyword_supplement(stream) -> dict[str, list[str]]:
    """Read user-supplied ``ticker,keyword`` pairs, one per line (no header)."""
    text = as_text(stream)
    extra: dict[str, list[str]] = {}
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 2:
            raise NewsParseError(lineno, f"expected ticker,keyword, got {len(row)} fields")
        ticker, keyword = row[0].strip(), row[1].strip().lower()
        if not ticker or not keyword:
            raise NewsParseError(lineno, "empty ticker or keyword")
        extra.setdefault(ticker, [])
        if keyword not in extra[ticker]:
            extra[ticker].append(keyword)
    return extra


def augment_keywords(keyword_set: KeywordSet, extra: Iterable[str]) -> KeywordSet:
    """Union user-supplied keywords into a set, preserving existing order."""
    merged = list(keyword_set.keywords)
    for keyword in extra:
        keyword = keyword.lower()
        if keyword not in merged:
            merged.append(keyword)
    return KeywordSet(ticker=keyword_set.ticker, keywords=tuple(merged))


def match_articles(
    corpus: Sequence[NewsArticle],
    keywords: KeywordSet,
    fields: Sequence[str] = MATCH_FIELDS,
) -> list[str]:
    """Ids of articles containing any keyword as a token, in chronological order.

    Matching is case-insensitive and token-based; multi-token keywords must
    appear as a contiguous token run. ``fields`` restricts the searched parts
    (any of title/body/tags).
    """
    if not keywords.keywords:
        raise NewsCorpusError(f"{keywords.ticker}: empty keyword set")
    unknown = set(fields) - set(MATCH_FIELDS)
    if unknown:
        raise NewsCorpusError(f"unknown match fields {sorted(unknown)}")
    needles = [tuple(tokenize(kw, min_len=1)) for kw in keywords.keywords]
    needles = [n for n in needles if n]

    hits = []
    for article in corpus:
        haystacks = []
        if "title" in fields:
            haystacks.append(tokenize(article.title, min_len=1))
        if "body" in fields:
            haystacks.append(tokenize(article.body, min_len=1))
        if "tags" in fields:
            for tag in article.tags:
                haystacks.append(tokenize(tag, min_len=1))
        if any(_contains_run(hay, needle) for hay in haystacks for needle in needles):
            hits.append((article.published_at, article.article_id))
    hits.sort()
    return [article_id for _, article_id in hits]


def length_stats(counts: Iterable[tuple[str, int]]) -> dict[str, SeriesStats]:
    """Per-source descriptive statistics over (source, token-count) pairs."""
    groups: dict[str, list[int]] = {}
    for source, count in counts:
        if count < 0:
            raise NewsCorpusError(f"negative token count {count} for source {source!r}")
        groups.setdefault(source, []).append(count)
    if not groups:
        raise NewsCorpusError("length_stats: no counts")
    return {source: describe(values) for source, values in sorted(groups.items())}


def _contains_run(haystack: list[str], needle: tuple[str, ...]) -> bool:
    n = len(needle)
    if n == 1:
        return needle[0] in haystack
    return any(tuple(haystack[i : i + n]) == needle for i in range(len(haystack) - n + 1))
