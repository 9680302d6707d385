"""Rewritten-news detection: a 3-layer MLP pair classifier over concatenated
article vectors, trained on labeled pairs, applied one-shot as articles arrive.

Classifier file layout (little-endian):

    magic  b"DDP1"
    u32    version (1)
    u32    layer-size count, then that many u32 layer sizes [in, h1, h2, 1]
    f64    decision threshold
    per affine layer: f32 weight matrix row-major (out x in), then f32 bias (out)
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ._io import ByteReader, as_bytes, as_text, pack_f32_array, pack_f64, pack_u32
from .embedding import EmbeddingProvider
from .optim import Adam, clip_global_norm

DDP_MAGIC = b"DDP1"

HIDDEN_WIDTHS = (256, 64)


class DedupError(ValueError):
    """Invalid dedup input, training set, or classifier file."""


@dataclass(frozen=True)
class LabeledPair:
    """Two distinct article ids labeled duplicate (rewrite) or distinct."""

    id_a: str
    id_b: str
    duplicate: bool

    def __post_init__(self):
        if self.id_a == self.id_b:
            raise DedupError(f"pair must join two distinct articles, got {self.id_a!r} twice")


@dataclass
class DedupTrainConfig:
    epochs: int = 60
    batch_size: int = 32
    learning_rate: float = 1e-3
    seed: int = 0
    clip_norm: float = 5.0
    threshold: float = 0.5
    hidden: tuple[int, int] = HIDDEN_WIDTHS

    def __post_init__(self):
        if self.epochs < 1:
            raise DedupError(f"epochs must be >= 1, got {self.epochs}")
        if not 0.0 < self.threshold < 1.0:
            raise DedupError(f"threshold must lie in (0, 1), got {self.threshold}")


class PairClassifier:
    """3-layer MLP: 2*dim -> h1 -> h2 -> 1, ReLU hidden, sigmoid output."""

    PARAM_NAMES = ("W1", "b1", "W2", "b2", "W3", "b3")

    def __init__(self, params: dict[str, np.ndarray], threshold: float = 0.5):
        if not 0.0 < threshold < 1.0:
            raise DedupError(f"threshold must lie in (0, 1), got {threshold}")
        missing = set(self.PARAM_NAMES) - set(params)
        if missing:
            raise DedupError(f"missing parameters {sorted(missing)}")
        w1, w2, w3 = params["W1"], params["W2"], params["W3"]
        if w2.shape[1] != w1.shape[0] or w3.shape[1] != w2.shape[0] or w3.shape[0] != 1:
            raise DedupError(
                f"layer shapes do not chain: {w1.shape} -> {w2.shape} -> {w3.shape}"
            )
        self.params = {k: np.asarray(params[k], dtype=np.float64) for k in self.PARAM_NAMES}
        self.threshold = threshold

    @classmethod
    def init(cls, dim: int, hidden: tuple[int, int] = HIDDEN_WIDTHS, seed: int = 0,
             threshold: float = 0.5) -> "PairClassifier":
        """Fresh classifier for vectors of the given dim (input width 2*dim)."""
        rng = np.random.Generator(np.random.PCG64(seed))
        sizes = (2 * dim, hidden[0], hidden[1], 1)
        params: dict[str, np.ndarray] = {}
        for i, (n_in, n_out) in enumerate(zip(sizes, sizes[1:]), start=1):
            bound = 1.0 / np.sqrt(n_in)
            params[f"W{i}"] = rng.uniform(-bound, bound, size=(n_out, n_in))
            params[f"b{i}"] = np.zeros(n_out)
        return cls(params, threshold=threshold)

    @property
    def input_dim(self) -> int:
        return self.params["W1"].shape[1]

    @property
    def vector_dim(self) -> int:
        return self.input_dim // 2

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (
            self.params["W1"].shape[1],
            self.params["W1"].shape[0],
            self.params["W2"].shape[0],
            self.params["W3"].shape[0],
        )

    def logits(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.input_dim:
            raise DedupError(f"expected input width {self.input_dim}, got {x.shape[1]}")
        p = self.params
        a1 = np.maximum(x @ p["W1"].T + p["b1"], 0.0)
        a2 = np.maximum(a1 @ p["W2"].T + p["b2"], 0.0)
        return (a2 @ p["W3"].T + p["b3"]).ravel()

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Duplicate probability for each row of pair features."""
        return _sigmoid(self.logits(x))

    def score_pair(self, va: np.ndarray, vb: np.ndarray) -> float:
        return float(self.forward(pair_features(va, vb))[0])

    def is_duplicate(self, va: np.ndarray, vb: np.ndarray) -> bool:
        return self.score_pair(va, vb) >= self.threshold

    def loss_and_grads(self, x: np.ndarray, y: np.ndarray) -> tuple[float, dict[str, np.ndarray]]:
        """Mean binary cross-entropy and analytic gradients for one batch."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        y = np.asarray(y, dtype=np.float64).ravel()
        if x.shape[0] != y.shape[0]:
            raise DedupError(f"batch size mismatch: {x.shape[0]} inputs vs {y.shape[0]} labels")
        p = self.params
        z1 = x @ p["W1"].T + p["b1"]
        a1 = np.maximum(z1, 0.0)
        z2 = a1 @ p["W2"].T + p["b2"]
        a2 = np.maximum(z2, 0.0)
        z3 = (a2 @ p["W3"].T + p["b3"]).ravel()

        # BCE via softplus keeps large |logits| finite.
        loss = float(np.mean(y * _softplus(-z3) + (1.0 - y) * _softplus(z3)))

        n = x.shape[0]
        dz3 = ((_sigmoid(z3) - y) / n)[:, None]
        grads = {
            "W3": dz3.T @ a2,
            "b3": dz3.sum(axis=0),
        }
        da2 = dz3 @ p["W3"]
        dz2 = da2 * (z2 > 0)
        grads["W2"] = dz2.T @ a1
        grads["b2"] = dz2.sum(axis=0)
        da1 = dz2 @ p["W2"]
        dz1 = da1 * (z1 > 0)
        grads["W1"] = dz1.T @ x
        grads["b1"] = dz1.sum(axis=0)
        return loss, grads


def pair_features(va: np.ndarray, vb: np.ndarray) -> np.ndarray:
    """Order-sensitive pair representation: the concatenation [va, vb]."""
    va = np.asarray(va, dtype=np.float64)
    vb = np.asarray(vb, dtype=np.float64)
    if va.shape != vb.shape or va.ndim != 1:
        raise DedupError(f"pair vectors must share one dim, got {va.shape} and {vb.shape}")
    return np.concatenate([va, vb])


def read_labeled_pairs(stream) -> list[LabeledPair]:
    """CSV rows ``id_a,id_b,label`` with label duplicate/distinct (or 1/0)."""
    text = as_text(stream)
    pairs = []
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 3:
            raise DedupError(f"line {lineno}: expected id_a,id_b,label")
        label = row[2].strip().lower()
        if label in ("duplicate", "1", "true"):
            duplicate = True
        elif label in ("distinct", "0", "false"):
            duplicate = False
        else:
            raise DedupError(f"line {lineno}: unknown label {row[2]!r}")
        pairs.append(LabeledPair(id_a=row[0].strip(), id_b=row[1].strip(), duplicate=duplicate))
    return pairs


def write_labeled_pairs(path_or_stream, pairs: Sequence[LabeledPair]) -> None:
    lines = [f"{p.id_a},{p.id_b},{'duplicate' if p.duplicate else 'distinct'}" for p in pairs]
    text = "\n".join(lines) + "\n"
    if isinstance(path_or_stream, (str, Path)):
        Path(path_or_stream).write_text(text, encoding="utf-8")
    else:
        path_or_stream.write(text)


def train_pair_classifier(
    pairs: Sequence[LabeledPair],
    provider: EmbeddingProvider,
    config: DedupTrainConfig | None = None,
) -> tuple[PairClassifier, list[float]]:
    """Train the pair classifier with mini-batch Adam on binary cross-entropy.

    Returns the classifier and per-epoch mean training losses. Deterministic
    for a fixed config seed.
    """
    config = config or DedupTrainConfig()
    if not pairs:
        raise DedupError("empty training pair set")
    labels = {p.duplicate for p in pairs}
    if len(labels) < 2:
        raise DedupError("training set must contain both duplicate and distinct pairs")

    x = np.stack(
        [
            pair_features(provider.article_vector(p.id_a), provider.article_vector(p.id_b))
            for p in pairs
        ]
    )
    y = np.array([1.0 if p.duplicate else 0.0 for p in pairs])

    classifier = PairClassifier.init(
        dim=provider.dim, hidden=config.hidden, seed=config.seed, threshold=config.threshold
    )
    optimizer = Adam(classifier.params, learning_rate=config.learning_rate)
    rng = np.random.Generator(np.random.PCG64(config.seed + 1))

    losses = []
    n = x.shape[0]
    for _ in range(config.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            loss, grads = classifier.loss_and_grads(x[batch], y[batch])
            clip_global_norm(grads, config.clip_norm)
            optimizer.step(grads)
            epoch_loss += loss * len(batch)
        losses.append(epoch_loss / n)
    return classifier, losses


def filter_duplicates(
    items: Iterable[tuple[str, datetime]],
    provider: EmbeddingProvider,
    classifier: PairClassifier,
    window_days: int | None = 3,
) -> list[str]:
    """One-shot duplicate filtering over chronologically ordered (id, timestamp).

    Each arriving article is scored against retained articles from the trailing
    ``window_days`` calendar days (all retained when None) and dropped when any
    comparison crosses the classifier threshold; the earliest copy survives.
    """
    retained: list[str] = []
    retained_ts: list[datetime] = []
    retained_vec: list[np.ndarray] = []
    for article_id, ts in items:
        candidate = provider.article_vector(article_id)
        cutoff = ts - timedelta(days=window_days) if window_days is not None else None
        duplicate = False
        for other_ts, other_vec in zip(retained_ts, retained_vec):
            if cutoff is not None and other_ts < cutoff:
                continue
            if classifier.is_duplicate(candidate, other_vec):
                duplicate = True
                break
        if not duplicate:
            retained.append(article_id)
            retained_ts.append(ts)
            retained_vec.append(candidate)
    return retained


def save_pair_classifier(path_or_stream, classifier: PairClassifier) -> None:
    sizes = classifier.layer_sizes
    payload = bytearray()
    payload += DDP_MAGIC
    payload += pack_u32(1)
    payload += pack_u32(len(sizes))
    for size in sizes:
        payload += pack_u32(size)
    payload += pack_f64(classifier.threshold)
    for i in (1, 2, 3):
        payload += pack_f32_array(classifier.params[f"W{i}"])
        payload += pack_f32_array(classifier.params[f"b{i}"])
    if isinstance(path_or_stream, (str, Path)):
        Path(path_or_stream).write_bytes(bytes(payload))
    else:
        path_or_stream.write(bytes(payload))


def load_pair_classifier(path_or_stream) -> PairClassifier:
    if isinstance(path_or_stream, (str, Path)):
        data = Path(path_or_stream).read_bytes()
    else:
        data = as_bytes(path_or_stream)
    reader = ByteReader(data)
    magic = reader.read(4)
    if magic != DDP_MAGIC:
        raise DedupError(f"bad magic {magic!r}, expected {DDP_MAGIC!r}")
    version = reader.u32()
    if version != 1:
        raise DedupError(f"unsupported classifier file version {version}")
    n_sizes = reader.u32()
    if n_sizes != 4:
        raise DedupError(f"expected 4 layer sizes, got {n_sizes}")
    sizes = [reader.u32() for _ in range(n_sizes)]
    threshold = reader.f64()
    params: dict[str, np.ndarray] = {}
    for i, (n_in, n_out) in enumerate(zip(sizes, sizes[1:]), start=1):
        params[f"W{i}"] = reader.f32_array(n_out * n_in).astype(np.float64).reshape(n_out, n_in)
        params[f"b{i}"] = reader.f32_array(n_out).astype(np.float64)
    if not reader.at_end():
        raise DedupError(f"{len(data) - reader.offset} trailing bytes in classifier file")
    return PairClassifier(params, threshold=threshold)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _softplus(z: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, z)
