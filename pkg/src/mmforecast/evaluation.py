"""Forecast quality metrics and per-run report types.

Sign accuracy, MAE, and R² are computed on returns (the model target);
MAPE is computed on prices after the pointwise reconstruction
price(d+1) = (return(d+1) + 1) * price(d) with the actual previous close
as the anchor for every day.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .models import LossCurves


class MetricError(ValueError):
    """Invalid metric input (length mismatch, empty, zero denominators)."""


@dataclass(frozen=True)
class MetricSet:
    """Direction accuracy (fraction), MAPE (percent), MAE, and R².

    R² is NaN when the actual series is constant (undefined denominator);
    JSON output renders that as null.
    """

    accuracy: float
    mape: float
    mae: float
    r2: float

    def __post_init__(self):
        if not 0.0 <= self.accuracy <= 1.0:
            raise MetricError(f"accuracy must lie in [0, 1], got {self.accuracy}")
        if self.mape < 0.0:
            raise MetricError(f"mape must be >= 0, got {self.mape}")

    def as_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "mape": self.mape,
            "mae": self.mae,
            "r2": None if math.isnan(self.r2) else self.r2,
        }


def _paired(predicted, actual) -> tuple[np.ndarray, np.ndarray]:
    predicted = np.asarray(predicted, dtype=np.float64).ravel()
    actual = np.asarray(actual, dtype=np.float64).ravel()
    if predicted.shape != actual.shape:
        raise MetricError(f"length mismatch: {predicted.shape[0]} vs {actual.shape[0]}")
    if predicted.size == 0:
        raise MetricError("empty input")
    return predicted, actual


def direction_accuracy(predicted_returns, actual_returns) -> float:
    """Fraction of matching sign classes; zero counts as the down class."""
    predicted, actual = _paired(predicted_returns, actual_returns)
    return float(np.mean((predicted > 0) == (actual > 0)))


def mape(predicted_prices, actual_prices) -> float:
    """100 * mean(|pred - actual| / |actual|)."""
    predicted, actual = _paired(predicted_prices, actual_prices)
    if np.any(actual == 0):
        raise MetricError("actual prices contain zero")
    return float(100.0 * np.mean(np.abs(predicted - actual) / np.abs(actual)))


def mae(predicted, actual) -> float:
    predicted, actual = _paired(predicted, actual)
    return float(np.mean(np.abs(predicted - actual)))


def r2(predicted, actual) -> float:
    """1 - SSres/SStot about the actual mean; NaN for a constant actual series."""
    predicted, actual = _paired(predicted, actual)
    if predicted.size < 2:
        raise MetricError("r2 needs at least 2 observations")
    ss_tot = float(np.sum((actual - actual.mean()) ** 2))
    if ss_tot == 0.0:
        return math.nan
    ss_res = float(np.sum((predicted - actual) ** 2))
    return 1.0 - ss_res / ss_tot


def pointwise_prices(predicted_returns, previous_closes) -> np.ndarray:
    """Per-day price forecasts anchored at the actual previous close."""
    predicted, anchors = _paired(predicted_returns, previous_closes)
    return (predicted + 1.0) * anchors


def metric_set(
    predicted_returns, actual_returns, previous_closes
) -> MetricSet:
    """Full metric set for one ticker's test window."""
    predicted, actual = _paired(predicted_returns, actual_returns)
    anchors = np.asarray(previous_closes, dtype=np.float64).ravel()
    predicted_prices = pointwise_prices(predicted, anchors)
    actual_prices = pointwise_prices(actual, anchors)
    return MetricSet(
        accuracy=direction_accuracy(predicted, actual),
        mape=mape(predicted_prices, actual_prices),
        mae=mae(predicted, actual),
        r2=r2(predicted, actual),
    )


def average_metrics(per_ticker: Mapping[str, MetricSet]) -> MetricSet:
    """Unweighted arithmetic mean across tickers (NaN R² propagates)."""
    if not per_ticker:
        raise MetricError("no ticker metrics to average")
    sets = list(per_ticker.values())
    return MetricSet(
        accuracy=float(np.mean([m.accuracy for m in sets])),
        mape=float(np.mean([m.mape for m in sets])),
        mae=float(np.mean([m.mae for m in sets])),
        r2=float(np.mean([m.r2 for m in sets])),
    )


@dataclass
class BacktestReport:
    """Per-ticker and averaged metrics plus loss curves and the resolved config."""

    config: dict
    per_ticker: dict[str, MetricSet] = field(default_factory=dict)
    averaged: MetricSet | None = None
    curves: dict[str, LossCurves] = field(default_factory=dict)
    failures: dict[str, str] = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "config": self.config,
            "per_ticker": {t: m.as_dict() for t, m in sorted(self.per_ticker.items())},
            "averaged": None if self.averaged is None else self.averaged.as_dict(),
            "loss_curves": {
                t: {"train": c.train, "test": c.test}
                for t, c in sorted(self.curves.items())
            },
            "failures": dict(sorted(self.failures.items())),
        }

    def render_text(self) -> str:
        """Aligned table, metrics to 3 decimals; full precision lives in JSON."""
        lines = []
        header = f"{'ticker':<10} {'accuracy%':>10} {'mape%':>10} {'mae':>12} {'r2':>10}"
        lines.append(header)
        lines.append("-" * len(header))

        def fmt(metrics: MetricSet, label: str) -> str:
            r2_text = "nan" if math.isnan(metrics.r2) else f"{metrics.r2:.3f}"
            return (
                f"{label:<10} {100 * metrics.accuracy:>10.3f} {metrics.mape:>10.3f} "
                f"{metrics.mae:>12.6f} {r2_text:>10}"
            )

        for ticker, metrics in sorted(self.per_ticker.items()):
            lines.append(fmt(metrics, ticker))
        if self.averaged is not None:
            lines.append("-" * len(header))
            lines.append(fmt(self.averaged, "average"))
        for ticker, error in sorted(self.failures.items()):
            lines.append(f"{ticker:<10} FAILED: {error}")
        return "\n".join(lines) + "\n"


def loss_curves_csv(report: BacktestReport) -> str:
    """CSV ``epoch,model,split,mse``; the model column is <label>/<ticker>."""
    label = report.config.get("run", {}).get("model_label") or report.config.get(
        "run", {}
    ).get("model", "model")
    lines = ["epoch,model,split,mse"]
    for ticker, curves in sorted(report.curves.items()):
        for split_name, values in (("train", curves.train), ("test", curves.test)):
            for epoch, value in enumerate(values, start=1):
                lines.append(f"{epoch},{label}/{ticker},{split_name},{value!r}")
    return "\n".join(lines) + "\n"


def export_loss_curves(report: BacktestReport, path) -> None:
    from pathlib import Path

    Path(path).write_text(loss_curves_csv(report), encoding="utf-8")
