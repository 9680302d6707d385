import io
import zlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmforecast.embedding import (
    AggregationMode,
    EmbeddingError,
    EmbeddingProvider,
    EmbeddingRecord,
    aggregate,
    fallback_model_id,
    hash_embed,
    hash_embed_corpus,
    read_embedding_file,
    write_embedding_file,
    zero_vector,
)
from mmforecast.newscorpus import NewsArticle


def make_records(count, dim, model_id="test-768", seed=0):
    rng = np.random.default_rng(seed)
    return [
        EmbeddingRecord(
            article_id=f"a{i}",
            model_id=model_id,
            values=rng.normal(size=dim).astype(np.float32),
        )
        for i in range(count)
    ]


class TestEmbeddingFile:
    def test_roundtrip_bit_exact(self):
        records = make_records(5, 32)
        buf = io.BytesIO()
        write_embedding_file(buf, records)
        provider = read_embedding_file(buf.getvalue())
        for record in records:
            (loaded,) = provider.vectors(record.article_id)
            assert loaded.dtype == np.float32
            assert np.array_equal(loaded, record.values)
        assert provider.model_id == "test-768"
        assert provider.dim == 32

    def test_two_records_dim_768(self):
        buf = io.BytesIO()
        write_embedding_file(buf, make_records(2, 768))
        provider = read_embedding_file(buf.getvalue())
        assert len(provider) == 2
        assert provider.dim == 768

    def test_mixed_dims_rejected_on_write(self):
        records = make_records(1, 768) + make_records(1, 896)
        with pytest.raises(EmbeddingError, match="mixed dims"):
            write_embedding_file(io.BytesIO(), records)

    def test_mixed_model_ids_rejected(self):
        records = make_records(1, 8) + make_records(1, 8, model_id="other")
        with pytest.raises(EmbeddingError, match="model-id"):
            write_embedding_file(io.BytesIO(), records)

    def test_bad_magic(self):
        with pytest.raises(EmbeddingError, match="magic"):
            read_embedding_file(b"NOPE" + b"\x00" * 20)

    def test_crc_failure(self):
        buf = io.BytesIO()
        write_embedding_file(buf, make_records(3, 8))
        data = bytearray(buf.getvalue())
        data[-10] ^= 0xFF  # corrupt a vector byte in the last record
        with pytest.raises(EmbeddingError, match="CRC"):
            read_embedding_file(bytes(data))

    def test_crc_covers_payload_after_magic(self):
        buf = io.BytesIO()
        write_embedding_file(buf, make_records(1, 4))
        data = buf.getvalue()
        stored = int.from_bytes(data[-4:], "little")
        assert stored == zlib.crc32(data[4:-4])

    def test_truncated_stream(self):
        buf = io.BytesIO()
        write_embedding_file(buf, make_records(3, 8))
        with pytest.raises(EmbeddingError):
            read_embedding_file(buf.getvalue()[:-10])

    def test_empty_file_refused(self):
        with pytest.raises(EmbeddingError, match="empty"):
            write_embedding_file(io.BytesIO(), [])

    def test_split_article_keeps_all_vectors(self):
        rng = np.random.default_rng(1)
        records = [
            EmbeddingRecord("a1", "m", rng.normal(size=8).astype(np.float32)),
            EmbeddingRecord("a1", "m", rng.normal(size=8).astype(np.float32)),
        ]
        buf = io.BytesIO()
        write_embedding_file(buf, records)
        provider = read_embedding_file(buf.getvalue())
        assert len(provider) == 1
        assert provider.record_count == 2
        vectors = provider.vectors("a1")
        assert len(vectors) == 2
        np.testing.assert_allclose(
            provider.article_vector("a1"), np.mean(vectors, axis=0)
        )

    def test_missing_id_lookup(self):
        provider = EmbeddingProvider("m", 4)
        with pytest.raises(EmbeddingError, match="no embedding"):
            provider.vectors("ghost")


class TestHashEmbed:
    def test_deterministic(self):
        a = hash_embed("gazprom raises dividends", 64)
        b = hash_embed("gazprom raises dividends", 64)
        assert np.array_equal(a, b)

    def test_bag_of_words_order_invariance(self):
        a = hash_embed("alpha beta gamma", 32)
        b = hash_embed("gamma alpha beta", 32)
        assert np.array_equal(a, b)

    def test_unit_norm(self):
        for text in ("one", "alpha beta", "много разных слов в тексте"):
            v = hash_embed(text, 48)
            assert abs(np.linalg.norm(v) - 1.0) <= 1e-9

    def test_empty_text_rejected(self):
        with pytest.raises(EmbeddingError, match="no tokens"):
            hash_embed("!!! ???", 16)

    def test_dim_validation(self):
        with pytest.raises(EmbeddingError):
            hash_embed("word", 0)

    def test_corpus_embedding(self):
        articles = [
            NewsArticle("a1", __import__("datetime").datetime(2023, 1, 1), "s", "t", "body one"),
            NewsArticle("a2", __import__("datetime").datetime(2023, 1, 2), "s", "t", "body two"),
        ]
        provider = hash_embed_corpus(articles, dim=16, text_field="body")
        assert len(provider) == 2
        assert provider.model_id == fallback_model_id(16, "body")
        np.testing.assert_array_equal(
            provider.article_vector("a1"), hash_embed("body one", 16)
        )


class TestAggregate:
    def test_sum(self):
        out = aggregate([np.array([1.0, 2.0]), np.array([3.0, 4.0])], AggregationMode.SUM)
        np.testing.assert_array_equal(out, [4.0, 6.0])

    def test_mean(self):
        out = aggregate([np.array([1.0, 2.0]), np.array([3.0, 4.0])], AggregationMode.MEAN)
        np.testing.assert_array_equal(out, [2.0, 3.0])

    def test_single_vector_identity(self):
        v = np.array([0.5, -1.5, 2.0])
        for mode in AggregationMode:
            np.testing.assert_array_equal(aggregate([v], mode), v)

    def test_empty_rejected(self):
        with pytest.raises(EmbeddingError, match="empty"):
            aggregate([], AggregationMode.SUM)

    def test_dim_mismatch(self):
        with pytest.raises(EmbeddingError, match="shape"):
            aggregate([np.zeros(2), np.zeros(3)], AggregationMode.SUM)

    def test_zero_vector_dims(self):
        assert zero_vector(768).shape == (768,)
        assert zero_vector(896).shape == (896,)
        assert not zero_vector(8).any()

    def test_zero_is_additive_identity(self):
        v = np.array([1.0, -2.0, 3.0])
        np.testing.assert_array_equal(aggregate([zero_vector(3), v], AggregationMode.SUM), v)

    def test_normalize_flag(self):
        out = aggregate([np.array([3.0, 4.0])], AggregationMode.SUM, normalize=True)
        np.testing.assert_allclose(out, [0.6, 0.8])
        # Zero vectors pass through untouched.
        out = aggregate([np.zeros(2), np.array([3.0, 4.0])], AggregationMode.SUM, normalize=True)
        np.testing.assert_allclose(out, [0.6, 0.8])

    @settings(max_examples=200, deadline=None)
    @given(
        st.lists(
            st.lists(st.floats(min_value=-10, max_value=10), min_size=3, max_size=3),
            min_size=1,
            max_size=8,
        ),
        st.randoms(use_true_random=False),
    )
    def test_mean_equals_sum_over_count_and_permutation_invariance(self, vectors, rnd):
        arrays = [np.array(v) for v in vectors]
        total = aggregate(arrays, AggregationMode.SUM)
        mean = aggregate(arrays, AggregationMode.MEAN)
        np.testing.assert_allclose(mean, total / len(arrays), atol=1e-12)
        shuffled = list(arrays)
        rnd.shuffle(shuffled)
        np.testing.assert_allclose(
            aggregate(shuffled, AggregationMode.SUM), total, atol=1e-12
        )
        np.testing.assert_allclose(
            aggregate(shuffled, AggregationMode.MEAN), mean, atol=1e-12
        )

    def test_aggregation_mode_parse(self):
        assert AggregationMode.parse("Sum") is AggregationMode.SUM
        assert AggregationMode.parse(" MEAN ") is AggregationMode.MEAN
        with pytest.raises(EmbeddingError):
            AggregationMode.parse("median")
