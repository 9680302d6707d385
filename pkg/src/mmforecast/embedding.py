"""Article embedding vectors: EMB1 file IO, hashed fallback embedder, aggregation.

EMB1 layout (little-endian):

    magic  b"EMB1"
    u16    model-id byte length, then UTF-8 model-id
    u32    dim
    u64    record count
    count times:
        u16  article-id byte length, then UTF-8 id
        dim  f32 values
    u32    CRC32 (zlib) of every byte after the magic up to this field

One article id may appear in several records (long texts split by an encoder
with a bounded context window); all of its vectors take part in aggregation.
"""

from __future__ import annotations

import enum
import hashlib
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ._io import (
    ByteReader,
    TruncatedFileError,
    as_bytes,
    pack_f32_array,
    pack_str16,
    pack_u32,
    pack_u64,
)
from .newscorpus import NewsArticle
from .text import tokenize

EMB_MAGIC = b"EMB1"


class EmbeddingError(ValueError):
    """Invalid embedding data, file, or aggregation request."""


@dataclass(frozen=True)
class EmbeddingRecord:
    """One fixed-dimension vector for one article under one embedding model."""

    article_id: str
    model_id: str
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values)
        # f32 stays f32 so file roundtrips are bit-exact; everything else is f64.
        values = values.astype(np.float32 if values.dtype == np.float32 else np.float64)
        if values.ndim != 1 or values.size == 0:
            raise EmbeddingError(f"{self.article_id}: values must be a non-empty 1-D vector")
        if not np.all(np.isfinite(values)):
            raise EmbeddingError(f"{self.article_id}: non-finite embedding values")
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])


class AggregationMode(enum.Enum):
    SUM = "sum"
    MEAN = "mean"

    @classmethod
    def parse(cls, name: str) -> "AggregationMode":
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise EmbeddingError(f"unknown aggregation mode {name!r} (expected sum or mean)") from None


class EmbeddingProvider:
    """Read-only article-id -> vectors lookup with a single model-id and dim."""

    def __init__(self, model_id: str, dim: int, records: Iterable[EmbeddingRecord] = ()):
        if dim < 1:
            raise EmbeddingError(f"dim must be >= 1, got {dim}")
        self.model_id = model_id
        self._dim = dim
        self._vectors: dict[str, list[np.ndarray]] = {}
        for record in records:
            self.add(record)

    @property
    def dim(self) -> int:
        return self._dim

    def add(self, record: EmbeddingRecord) -> None:
        if record.model_id != self.model_id:
            raise EmbeddingError(
                f"model-id mismatch: provider has {self.model_id!r}, record has {record.model_id!r}"
            )
        if record.dim != self._dim:
            raise EmbeddingError(
                f"dim mismatch: provider dim {self._dim}, record {record.article_id!r} has {record.dim}"
            )
        self._vectors.setdefault(record.article_id, []).append(record.values)

    def __contains__(self, article_id: str) -> bool:
        return article_id in self._vectors

    def __len__(self) -> int:
        return len(self._vectors)

    @property
    def record_count(self) -> int:
        return sum(len(v) for v in self._vectors.values())

    def ids(self) -> list[str]:
        return list(self._vectors)

    def vectors(self, article_id: str) -> list[np.ndarray]:
        """Every vector stored for an article (several when the text was split)."""
        try:
            return list(self._vectors[article_id])
        except KeyError:
            raise EmbeddingError(f"no embedding for article {article_id!r}") from None

    def article_vector(self, article_id: str) -> np.ndarray:
        """Single per-article vector: the mean of its stored vectors."""
        vectors = self.vectors(article_id)
        return vectors[0] if len(vectors) == 1 else np.mean(vectors, axis=0)

    def records(self) -> list[EmbeddingRecord]:
        return [
            EmbeddingRecord(article_id=aid, model_id=self.model_id, values=vec)
            for aid, vecs in self._vectors.items()
            for vec in vecs
        ]


def write_embedding_file(path_or_stream, records: Sequence[EmbeddingRecord]) -> None:
    """Write records as an EMB1 file; values are stored as f32."""
    if not records:
        raise EmbeddingError("refusing to write an empty embedding file")
    model_id = records[0].model_id
    dim = records[0].dim
    for record in records:
        if record.model_id != model_id:
            raise EmbeddingError(
                f"mixed model-ids in one file: {model_id!r} vs {record.model_id!r}"
            )
        if record.dim != dim:
            raise EmbeddingError(f"mixed dims in one file: {dim} vs {record.dim}")

    payload = bytearray()
    payload += pack_str16(model_id)
    payload += pack_u32(dim)
    payload += pack_u64(len(records))
    for record in records:
        payload += pack_str16(record.article_id)
        payload += pack_f32_array(record.values)
    blob = EMB_MAGIC + bytes(payload) + pack_u32(zlib.crc32(bytes(payload)))

    if isinstance(path_or_stream, (str, Path)):
        with open(path_or_stream, "wb") as fh:
            fh.write(blob)
    else:
        path_or_stream.write(blob)


def read_embedding_file(path_or_stream) -> EmbeddingProvider:
    """Read an EMB1 file, validating magic, dims, record count, and CRC."""
    if isinstance(path_or_stream, (str, Path)):
        with open(path_or_stream, "rb") as fh:
            data = fh.read()
    else:
        data = as_bytes(path_or_stream)

    try:
        reader = ByteReader(data)
        magic = reader.read(4)
        if magic != EMB_MAGIC:
            raise EmbeddingError(f"bad magic {magic!r}, expected {EMB_MAGIC!r}")
        model_id = reader.str16()
        dim = reader.u32()
        if dim < 1:
            raise EmbeddingError(f"declared dim must be >= 1, got {dim}")
        count = reader.u64()

        provider = EmbeddingProvider(model_id=model_id, dim=dim)
        for _ in range(count):
            article_id = reader.str16()
            values = reader.f32_array(dim)
            provider.add(EmbeddingRecord(article_id=article_id, model_id=model_id, values=values))

        payload_end = reader.offset
        stored_crc = reader.u32()
    except TruncatedFileError as exc:
        raise EmbeddingError(f"truncated embedding file: {exc}") from exc
    if not reader.at_end():
        raise EmbeddingError(f"{len(data) - reader.offset} trailing bytes after CRC")
    actual_crc = zlib.crc32(data[4:payload_end])
    if stored_crc != actual_crc:
        raise EmbeddingError(f"CRC mismatch: stored {stored_crc:#010x}, computed {actual_crc:#010x}")
    return provider


def hash_embed(text: str, dim: int) -> np.ndarray:
    """Deterministic hashed bag-of-words embedding, L2-normalized.

    Each token is hashed (blake2b, platform-independent) to a coordinate and a
    sign; signed counts accumulate and the result is normalized to unit length.
    """
    if dim < 1:
        raise EmbeddingError(f"dim must be >= 1, got {dim}")
    tokens = tokenize(text)
    if not tokens:
        raise EmbeddingError("hash_embed: no tokens after tokenization")
    values = np.zeros(dim, dtype=np.float64)
    for token in tokens:
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
        h = int.from_bytes(digest, "little")
        sign = 1.0 if h & 1 else -1.0
        values[(h >> 1) % dim] += sign
    norm = float(np.linalg.norm(values))
    if norm == 0.0:  # possible only through sign cancellations
        values[0] = 1.0
        norm = 1.0
    return values / norm


FALLBACK_MODEL_PREFIX = "hashed-bow"


def fallback_model_id(dim: int, text_field: str = "title_body") -> str:
    return f"{FALLBACK_MODEL_PREFIX}-{text_field}-d{dim}"


def hash_embed_corpus(
    articles: Iterable[NewsArticle], dim: int, text_field: str = "title_body"
) -> EmbeddingProvider:
    """Embed a whole corpus with the hashed fallback embedder (one vector per article)."""
    model_id = fallback_model_id(dim, text_field)
    provider = EmbeddingProvider(model_id=model_id, dim=dim)
    for article in articles:
        provider.add(
            EmbeddingRecord(
                article_id=article.article_id,
                model_id=model_id,
                values=hash_embed(article.text(text_field), dim),
            )
        )
    return provider


def zero_vector(dim: int) -> np.ndarray:
    """All-zero news vector for days without publications."""
    if dim < 1:
        raise EmbeddingError(f"dim must be >= 1, got {dim}")
    return np.zeros(dim, dtype=np.float64)


def aggregate(
    vectors: Sequence[np.ndarray],
    mode: AggregationMode,
    normalize: bool = False,
) -> np.ndarray:
    """Coordinate-wise Sum or Mean of equal-dimension vectors.

    ``normalize`` L2-normalizes each vector first (zero vectors pass through);
    off by default — raw vectors are aggregated as produced by the encoder.
    """
    if len(vectors) == 0:
        raise EmbeddingError("aggregate: empty vector sequence (use zero_vector for no-news days)")
    arrays = [np.asarray(v, dtype=np.float64) for v in vectors]
    dims = {a.shape for a in arrays}
    if len(dims) != 1 or arrays[0].ndim != 1:
        raise EmbeddingError(f"aggregate: mismatched vector shapes {sorted(dims)}")
    stack = np.stack(arrays)
    if normalize:
        norms = np.linalg.norm(stack, axis=1, keepdims=True)
        stack = np.where(norms > 0, stack / np.where(norms == 0, 1.0, norms), stack)
    if mode is AggregationMode.SUM:
        return stack.sum(axis=0)
    if mode is AggregationMode.MEAN:
        return stack.mean(axis=0)
    raise EmbeddingError(f"unknown aggregation mode {mode!r}")
