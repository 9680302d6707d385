"""Next-session return predictors: an LSTM regressor and five classical baselines."""

from .lstm import LossCurves, LstmModel, NanLossError, TrainConfig, lstm_forward, train_lstm
from .baselines import (
    BaselineError,
    DecisionTreeModel,
    GbtModel,
    KnnModel,
    OlsModel,
    RandomForestModel,
    fit_baseline,
)
from .serialize import load_model, save_model

MODEL_VARIANTS = ("lstm", "ols", "knn", "dt", "rf", "gbt")

__all__ = [
    "BaselineError",
    "DecisionTreeModel",
    "GbtModel",
    "KnnModel",
    "LossCurves",
    "LstmModel",
    "MODEL_VARIANTS",
    "NanLossError",
    "OlsModel",
    "RandomForestModel",
    "TrainConfig",
    "fit_baseline",
    "lstm_forward",
    "load_model",
    "save_model",
    "train_lstm",
]
