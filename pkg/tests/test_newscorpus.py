import json
import logging
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmforecast.newscorpus import (
    NO_TITLE,
    CompanyRecord,
    KeywordSet,
    NewsCorpusError,
    NewsParseError,
    augment_keywords,
    length_stats,
    load_keyword_supplement,
    match_articles,
    parse_news,
    parse_registry,
    parse_timestamp,
    tfidf_keywords,
)
from mmforecast.text import tokenize


def jsonl(*records):
    return "\n".join(json.dumps(r, ensure_ascii=False) for r in records) + "\n"


def record(i, **overrides):
    base = {
        "id": f"a{i}",
        "published_at": f"2023-05-0{1 + i % 9}T12:3{i % 10}",
        "source": "Finam",
        "title": f"title {i}",
        "body": f"body text {i}",
        "tags": [],
    }
    base.update(overrides)
    return base


class TestParseNews:
    def test_missing_title_gets_marker(self):
        rec = record(1)
        del rec["title"]
        articles = parse_news(jsonl(rec))
        assert articles[0].title == NO_TITLE

    def test_tags_preserved(self):
        articles = parse_news(jsonl(record(1, tags=["SGZH"])))
        assert articles[0].tags == ("SGZH",)

    def test_missing_tags_empty(self):
        rec = record(1)
        del rec["tags"]
        assert parse_news(jsonl(rec))[0].tags == ()

    def test_duplicate_id_keeps_first_and_warns(self, caplog):
        text = jsonl(record(1, body="first"), record(1, body="second"))
        with caplog.at_level(logging.WARNING):
            articles = parse_news(text)
        assert len(articles) == 1
        assert articles[0].body == "first"
        assert "duplicate article id" in caplog.text

    def test_missing_date_reports_line(self):
        rec = record(2)
        del rec["published_at"]
        with pytest.raises(NewsParseError, match="line 2: missing date"):
            parse_news(jsonl(record(1), rec))

    def test_bad_json_reports_line(self):
        with pytest.raises(NewsParseError, match="line 1"):
            parse_news("{not json}\n")

    def test_missing_body_rejected(self):
        rec = record(1, body="")
        with pytest.raises(NewsParseError, match="body"):
            parse_news(jsonl(rec))

    def test_tags_must_be_array(self):
        with pytest.raises(NewsParseError, match="tags"):
            parse_news(jsonl(record(1, tags="SGZH")))

    def test_timestamps(self):
        assert parse_timestamp("2023-05-01").hour == 0
        assert parse_timestamp("2023-05-01T13:45").minute == 45
        # Z-suffixed instants normalize to naive UTC.
        assert parse_timestamp("2023-05-01T13:45:00Z").hour == 13


class TestRegistry:
    def test_parse(self):
        text = "ticker,name,description\nSMLT,Samolet,residential development\n"
        records = parse_registry(text)
        assert records == [
            CompanyRecord(ticker="SMLT", name="Samolet", description="residential development")
        ]

    def test_duplicate_ticker(self):
        text = "ticker,name,description\nA,a,x\nA,b,y\n"
        with pytest.raises(NewsParseError, match="duplicate ticker"):
            parse_registry(text)

    def test_empty_description(self):
        with pytest.raises(NewsParseError, match="empty description"):
            parse_registry("ticker,name,description\nA,a,\n")


class TestTfidfKeywords:
    def test_single_company_top_by_frequency(self):
        registry = [CompanyRecord("A", "A", "alpha alpha alpha beta beta gamma")]
        keywords = tfidf_keywords(registry, k=2)[0].keywords
        assert keywords == ("alpha", "beta")

    def test_rare_token_outscores_shared(self):
        # "rent" appears only in SMLT's description; "market" in all three.
        registry = [
            CompanyRecord("SMLT", "", "rent market"),
            CompanyRecord("SNGS", "", "oil market"),
            CompanyRecord("MTLR", "", "coal market"),
        ]
        sets = {ks.ticker: ks for ks in tfidf_keywords(registry, k=2)}

        # Independent recomputation with the stated formula.
        def score(tf, df, n=3):
            return tf * (math.log((1 + n) / (1 + df)) + 1.0)

        assert score(1, 1) > score(1, 3)
        assert sets["SMLT"].keywords[0] == "rent"

    def test_tie_broken_lexicographically(self):
        registry = [CompanyRecord("A", "A", "zeta alpha")]
        assert tfidf_keywords(registry, k=2)[0].keywords == ("alpha", "zeta")

    def test_deterministic(self):
        registry = [
            CompanyRecord("A", "", "coal mining ore coal"),
            CompanyRecord("B", "", "oil gas drilling oil"),
        ]
        assert tfidf_keywords(registry, k=3) == tfidf_keywords(registry, k=3)

    def test_short_tokens_dropped(self):
        registry = [CompanyRecord("A", "A", "a b of coal")]
        keywords = tfidf_keywords(registry, k=10)[0].keywords
        assert keywords == ("coal", "of")

    def test_empty_description_tokens(self):
        with pytest.raises(NewsCorpusError, match="no tokens"):
            tfidf_keywords([CompanyRecord("A", "A", "! ? .")], k=3)

    def test_k_validation(self):
        with pytest.raises(NewsCorpusError):
            tfidf_keywords([CompanyRecord("A", "A", "coal")], k=0)

    def test_idf_monotonicity(self):
        # A token in fewer descriptions never has lower idf.
        def idf(df, n):
            return math.log((1 + n) / (1 + df)) + 1.0

        for n in range(1, 30):
            values = [idf(df, n) for df in range(1, n + 1)]
            assert values == sorted(values, reverse=True)


class TestMatchArticles:
    def make_corpus(self):
        return parse_news(
            jsonl(
                record(1, title="no title", body="обзор рынка", tags=["SGZH"],
                       published_at="2023-05-02T10:00"),
                record(2, body="Сегежа готовит отчет", tags=[],
                       published_at="2023-05-01T09:00"),
                record(3, body="nothing relevant here", tags=[],
                       published_at="2023-05-03T11:00"),
            )
        )

    def test_tag_match_case_insensitive(self):
        corpus = self.make_corpus()
        ids = match_articles(corpus, KeywordSet("SGZH", ("sgzh",)))
        assert ids == ["a1"]

    def test_body_match_and_order(self):
        corpus = self.make_corpus()
        ids = match_articles(corpus, KeywordSet("SGZH", ("sgzh", "сегежа")))
        assert ids == ["a2", "a1"]  # chronological

    def test_no_match_excluded(self):
        corpus = self.make_corpus()
        assert match_articles(corpus, KeywordSet("X", ("absent",))) == []

    def test_field_restriction(self):
        corpus = self.make_corpus()
        assert match_articles(corpus, KeywordSet("SGZH", ("sgzh",)), fields=("body",)) == []

    def test_substring_does_not_match(self):
        corpus = parse_news(jsonl(record(1, body="prefixsgzhsuffix words")))
        assert match_articles(corpus, KeywordSet("SGZH", ("sgzh",))) == []

    def test_multi_token_keyword_contiguous(self):
        corpus = parse_news(jsonl(record(1, body="the central bank rate decision")))
        assert match_articles(corpus, KeywordSet("X", ("central bank",))) == ["a1"]
        assert match_articles(corpus, KeywordSet("X", ("bank central",))) == []

    def test_empty_keywords_rejected(self):
        with pytest.raises(NewsCorpusError, match="empty keyword"):
            match_articles([], KeywordSet("X", ()))

    @settings(max_examples=50, deadline=None)
    @given(
        st.lists(
            st.sampled_from(["coal", "oil", "gas", "ore"]),
            min_size=1,
            max_size=3,
            unique=True,
        )
    )
    def test_monotone_in_keywords(self, extra):
        corpus = self.make_corpus()
        base = set(match_articles(corpus, KeywordSet("S", ("sgzh",))))
        grown = set(match_articles(corpus, KeywordSet("S", tuple(["sgzh"] + extra))))
        assert base <= grown


class TestLengthStats:
    def test_constant_counts(self):
        stats = length_stats([("RBC", 10), ("RBC", 10), ("RBC", 10)])["RBC"]
        assert stats.mean == 10 and stats.std == 0

    def test_quartile_interpolation(self):
        stats = length_stats([("S", 1), ("S", 2), ("S", 3), ("S", 4)])["S"]
        assert stats.q25 == pytest.approx(1.75)

    def test_negative_count_rejected(self):
        with pytest.raises(NewsCorpusError, match="negative"):
            length_stats([("S", -1)])

    def test_empty_rejected(self):
        with pytest.raises(NewsCorpusError, match="no counts"):
            length_stats([])

    def test_groups_are_separate(self):
        stats = length_stats([("A", 1), ("B", 100)])
        assert stats["A"].mean == 1 and stats["B"].mean == 100


class TestSupplement:
    def test_load_and_augment(self):
        extra = load_keyword_supplement("MTLR,мечел\nMTLR,mechel\nSNGS,surgut\n")
        assert extra == {"MTLR": ["мечел", "mechel"], "SNGS": ["surgut"]}
        merged = augment_keywords(KeywordSet("MTLR", ("coal",)), extra["MTLR"])
        assert merged.keywords == ("coal", "мечел", "mechel")

    def test_duplicates_not_added(self):
        merged = augment_keywords(KeywordSet("A", ("coal",)), ["coal", "Coal"])
        assert merged.keywords == ("coal",)

    def test_bad_row(self):
        with pytest.raises(NewsParseError):
            load_keyword_supplement("onlyticker\n")


def test_tokenize_unicode_and_min_len():
    assert tokenize("Сегежа (SGZH): таргет 16.2 руб.") == ["сегежа", "sgzh", "таргет", "16", "руб"]
    assert tokenize("a bb ccc", min_len=1) == ["a", "bb", "ccc"]
