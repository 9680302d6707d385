"""Single-layer LSTM regressor trained with backpropagation through time.

The flat feature row is consumed as a sequence of 5 time steps of the 4
per-session returns (close, open, high, low). In dual modality the news
vector occupies extra input slots that stay zero except at the step(s)
selected by ``news_at``: the final step by default, or every step.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..features import FeatureRow, PRICE_FEATURES, PRICE_WINDOW
from ..marketdata import RETURN_FIELDS
from ..optim import Adam, clip_global_norm


class LstmError(ValueError):
    """Invalid LSTM configuration or input shape."""


class NanLossError(LstmError):
    """Training loss became non-finite; carries epoch and batch index."""

    def __init__(self, epoch: int, batch: int):
        super().__init__(f"non-finite loss at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 32
    learning_rate: float = 1e-3
    seed: int = 0
    clip_norm: float = 5.0
    hidden_dim: int = 64
    news_at: str = "last"
    standardize: bool = False

    def __post_init__(self):
        if self.epochs < 1:
            raise LstmError(f"epochs must be >= 1, got {self.epochs}")
        if self.learning_rate <= 0:
            raise LstmError(f"learning rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise LstmError(f"batch size must be >= 1, got {self.batch_size}")
        if self.hidden_dim < 1:
            raise LstmError(f"hidden dim must be >= 1, got {self.hidden_dim}")
        if self.news_at not in ("last", "all"):
            raise LstmError(f"news_at must be last or all, got {self.news_at!r}")


@dataclass
class LossCurves:
    """Per-epoch MSE on the training rows and an optional held-out set.

    ``initial_*`` hold the pre-training values and are not part of the
    per-epoch lists.
    """

    train: list[float] = field(default_factory=list)
    test: list[float] = field(default_factory=list)
    initial_train: float | None = None
    initial_test: float | None = None


class LstmModel:
    """LSTM cell (gates i, f, g, o) plus an affine head on the final hidden state."""

    PARAM_NAMES = ("W", "U", "b", "w_out", "b_out")

    def __init__(
        self,
        params: dict[str, np.ndarray],
        hidden_dim: int,
        news_dim: int = 0,
        news_at: str = "last",
        steps: int = PRICE_WINDOW,
        step_features: int = len(RETURN_FIELDS),
        x_mean: np.ndarray | None = None,
        x_std: np.ndarray | None = None,
    ):
        input_dim = step_features + news_dim
        expected = {
            "W": (4 * hidden_dim, input_dim),
            "U": (4 * hidden_dim, hidden_dim),
            "b": (4 * hidden_dim,),
            "w_out": (hidden_dim,),
            "b_out": (1,),
        }
        for name, shape in expected.items():
            if name not in params:
                raise LstmError(f"missing parameter {name!r}")
            if params[name].shape != shape:
                raise LstmError(f"{name} must have shape {shape}, got {params[name].shape}")
            if not np.all(np.isfinite(params[name])):
                raise LstmError(f"{name} contains non-finite values")
        self.params = {k: np.asarray(params[k], dtype=np.float64) for k in self.PARAM_NAMES}
        self.hidden_dim = hidden_dim
        self.news_dim = news_dim
        self.news_at = news_at
        self.steps = steps
        self.step_features = step_features
        self.x_mean = None if x_mean is None else np.asarray(x_mean, dtype=np.float64)
        self.x_std = None if x_std is None else np.asarray(x_std, dtype=np.float64)

    @classmethod
    def init(
        cls,
        hidden_dim: int,
        news_dim: int = 0,
        news_at: str = "last",
        seed: int = 0,
    ) -> "LstmModel":
        """Weights uniform in (-1/sqrt(hidden), +1/sqrt(hidden)); zero biases
        except the forget gate's, which starts at +1."""
        rng = np.random.Generator(np.random.PCG64(seed))
        bound = 1.0 / np.sqrt(hidden_dim)
        input_dim = len(RETURN_FIELDS) + news_dim
        h = hidden_dim
        params = {
            "W": rng.uniform(-bound, bound, size=(4 * h, input_dim)),
            "U": rng.uniform(-bound, bound, size=(4 * h, h)),
            "b": np.zeros(4 * h),
            "w_out": rng.uniform(-bound, bound, size=h),
            "b_out": np.zeros(1),
        }
        params["b"][h : 2 * h] = 1.0  # forget gate
        return cls(params, hidden_dim=hidden_dim, news_dim=news_dim, news_at=news_at)

    @property
    def input_dim(self) -> int:
        return self.step_features + self.news_dim

    @property
    def feature_length(self) -> int:
        return PRICE_FEATURES + self.news_dim

    def sequences(self, x: np.ndarray) -> np.ndarray:
        """Flat rows (B, 20 + news_dim) -> step inputs (B, steps, input_dim)."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.feature_length:
            raise LstmError(f"expected feature length {self.feature_length}, got {x.shape[1]}")
        if self.x_mean is not None:
            x = (x - self.x_mean) / self.x_std
        batch = x.shape[0]
        seq = np.zeros((batch, self.steps, self.input_dim))
        # Field-major layout: 5 closes, 5 opens, 5 highs, 5 lows.
        price = x[:, :PRICE_FEATURES].reshape(batch, self.step_features, self.steps)
        seq[:, :, : self.step_features] = np.swapaxes(price, 1, 2)
        if self.news_dim:
            news = x[:, PRICE_FEATURES:]
            if self.news_at == "all":
                seq[:, :, self.step_features :] = news[:, None, :]
            else:
                seq[:, -1, self.step_features :] = news
        return seq

    def _forward(self, seq: np.ndarray):
        """Run the cell over (B, T, D); returns predictions and the BPTT cache."""
        batch, steps, _ = seq.shape
        h_dim = self.hidden_dim
        p = self.params
        h = np.zeros((batch, h_dim))
        c = np.zeros((batch, h_dim))
        cache = []
        for t in range(steps):
            x_t = seq[:, t, :]
            z = x_t @ p["W"].T + h @ p["U"].T + p["b"]
            i = _sigmoid(z[:, :h_dim])
            f = _sigmoid(z[:, h_dim : 2 * h_dim])
            g = np.tanh(z[:, 2 * h_dim : 3 * h_dim])
            o = _sigmoid(z[:, 3 * h_dim :])
            c_prev, h_prev = c, h
            c = f * c_prev + i * g
            tanh_c = np.tanh(c)
            h = o * tanh_c
            cache.append((x_t, h_prev, c_prev, i, f, g, o, c, tanh_c))
        y_hat = h @ p["w_out"] + p["b_out"][0]
        return y_hat, h, cache

    def predict(self, x: np.ndarray) -> np.ndarray | float:
        """Predicted return(s); scalar for a single flat row."""
        single = np.asarray(x).ndim == 1
        y_hat, _, _ = self._forward(self.sequences(x))
        return float(y_hat[0]) if single else y_hat

    def mse(self, rows: Sequence[FeatureRow]) -> float:
        x, y = rows_to_arrays(rows)
        return float(np.mean((self.predict(x) - y) ** 2))

    def loss_and_grads(self, x: np.ndarray, y: np.ndarray) -> tuple[float, dict[str, np.ndarray]]:
        """Mean squared error and analytic BPTT gradients for one batch."""
        y = np.asarray(y, dtype=np.float64).ravel()
        seq = self.sequences(x)
        y_hat, h_last, cache = self._forward(seq)
        if y_hat.shape[0] != y.shape[0]:
            raise LstmError(f"batch size mismatch: {y_hat.shape[0]} inputs vs {y.shape[0]} targets")
        batch = y.shape[0]
        h_dim = self.hidden_dim
        p = self.params
        residual = y_hat - y
        loss = float(np.mean(residual**2))

        d_yhat = 2.0 * residual / batch
        grads = {
            "w_out": h_last.T @ d_yhat,
            "b_out": np.array([d_yhat.sum()]),
            "W": np.zeros_like(p["W"]),
            "U": np.zeros_like(p["U"]),
            "b": np.zeros_like(p["b"]),
        }
        dh = d_yhat[:, None] * p["w_out"]
        dc = np.zeros((batch, h_dim))
        for x_t, h_prev, c_prev, i, f, g, o, c, tanh_c in reversed(cache):
            do = dh * tanh_c
            dc = dc + dh * o * (1.0 - tanh_c**2)
            di = dc * g
            dg = dc * i
            df = dc * c_prev
            dz = np.concatenate(
                [
                    di * i * (1.0 - i),
                    df * f * (1.0 - f),
                    dg * (1.0 - g**2),
                    do * o * (1.0 - o),
                ],
                axis=1,
            )
            grads["W"] += dz.T @ x_t
            grads["U"] += dz.T @ h_prev
            grads["b"] += dz.sum(axis=0)
            dh = dz @ p["U"]
            dc = dc * f
        return loss, grads


def lstm_forward(model: LstmModel, x: np.ndarray) -> float:
    """Scalar prediction for one flat feature row."""
    return float(model.predict(np.asarray(x, dtype=np.float64).ravel()))


def rows_to_arrays(rows: Sequence[FeatureRow]) -> tuple[np.ndarray, np.ndarray]:
    """Stack rows into (X, y), enforcing a uniform feature length."""
    if not rows:
        raise LstmError("no feature rows")
    dims = {r.news_dim for r in rows}
    if len(dims) != 1:
        raise LstmError(f"rows mix news dims {sorted(dims)}")
    x = np.stack([r.feature_vector() for r in rows])
    y = np.array([r.y for r in rows])
    return x, y


def train_lstm(
    rows: Sequence[FeatureRow],
    config: TrainConfig | None = None,
    eval_rows: Sequence[FeatureRow] | None = None,
) -> tuple[LstmModel, LossCurves]:
    """Mini-batch Adam over BPTT gradients with global-norm clipping.

    Per-epoch MSE is recorded on the full training set and, when given, the
    held-out rows. Deterministic for a fixed config seed.
    """
    config = config or TrainConfig()
    x, y = rows_to_arrays(rows)
    news_dim = rows[0].news_dim

    model = LstmModel.init(
        hidden_dim=config.hidden_dim,
        news_dim=news_dim,
        news_at=config.news_at,
        seed=config.seed,
    )
    if config.standardize:
        mean = x.mean(axis=0)
        std = x.std(axis=0)
        std[std == 0.0] = 1.0
        model.x_mean = mean
        model.x_std = std

    eval_xy = rows_to_arrays(eval_rows) if eval_rows else None
    curves = LossCurves(initial_train=_mse(model, x, y))
    if eval_xy:
        curves.initial_test = _mse(model, *eval_xy)

    optimizer = Adam(model.params, learning_rate=config.learning_rate)
    rng = np.random.Generator(np.random.PCG64(config.seed + 1))
    n = x.shape[0]
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        for batch_index, start in enumerate(range(0, n, config.batch_size)):
            batch = order[start : start + config.batch_size]
            loss, grads = model.loss_and_grads(x[batch], y[batch])
            if not np.isfinite(loss):
                raise NanLossError(epoch, batch_index)
            clip_global_norm(grads, config.clip_norm)
            optimizer.step(grads)
        curves.train.append(_mse(model, x, y))
        if eval_xy:
            curves.test.append(_mse(model, *eval_xy))
    return model, curves


def _mse(model: LstmModel, x: np.ndarray, y: np.ndarray) -> float:
    return float(np.mean((model.predict(x) - y) ** 2))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out
