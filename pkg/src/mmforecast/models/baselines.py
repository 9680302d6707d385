"""Classical baselines over flat feature rows: OLS, KNN, decision tree,
random forest, and a gradient-boosted-trees stand-in for XGBoost."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..features import FeatureRow


class BaselineError(ValueError):
    """Invalid baseline configuration or input."""


def _as_xy(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape[0] != y.shape[0]:
        raise BaselineError(f"X has {x.shape[0]} rows but y has {y.shape[0]}")
    if x.shape[0] == 0:
        raise BaselineError("empty training set")
    return x, y


def _check_width(x, n_features: int) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != n_features:
        raise BaselineError(f"expected {n_features} features, got {x.shape[1]}")
    return x


class OlsModel:
    """Least squares via normal equations with an unconditional tiny ridge.

    The ridge (1e-8 by default) covers near-collinear return windows without a
    rank fallback; the intercept column is penalized like any other.
    """

    def __init__(self, ridge: float = 1e-8):
        self.ridge = ridge
        self.coef_: np.ndarray | None = None
        self.intercept_: float | None = None

    def fit(self, x, y) -> "OlsModel":
        x, y = _as_xy(x, y)
        design = np.hstack([np.ones((x.shape[0], 1)), x])
        gram = design.T @ design + self.ridge * np.eye(design.shape[1])
        beta = np.linalg.solve(gram, design.T @ y)
        self.intercept_ = float(beta[0])
        self.coef_ = beta[1:]
        return self

    def predict(self, x) -> np.ndarray:
        if self.coef_ is None:
            raise BaselineError("model is not fitted")
        x = _check_width(x, self.coef_.shape[0])
        return x @ self.coef_ + self.intercept_


class KnnModel:
    """k-nearest-neighbors regression: Euclidean distance, uniform weights.

    Distance ties resolve toward the lower training index.
    """

    def __init__(self, k: int = 5):
        if k < 1:
            raise BaselineError(f"k must be >= 1, got {k}")
        self.k = k
        self.x_: np.ndarray | None = None
        self.y_: np.ndarray | None = None

    def fit(self, x, y) -> "KnnModel":
        x, y = _as_xy(x, y)
        if self.k > x.shape[0]:
            raise BaselineError(f"k={self.k} exceeds training size {x.shape[0]}")
        self.x_ = x
        self.y_ = y
        return self

    def predict(self, x) -> np.ndarray:
        if self.x_ is None:
            raise BaselineError("model is not fitted")
        x = _check_width(x, self.x_.shape[1])
        d2 = ((x[:, None, :] - self.x_[None, :, :]) ** 2).sum(axis=2)
        # Stable sort keeps lower training indices first among equal distances.
        nearest = np.argsort(d2, axis=1, kind="stable")[:, : self.k]
        return self.y_[nearest].mean(axis=1)


@dataclass
class _TreeNodes:
    """Flat tree arrays; feature -1 marks a leaf."""

    feature: list[int]
    threshold: list[float]
    left: list[int]
    right: list[int]
    value: list[float]

    @classmethod
    def empty(cls) -> "_TreeNodes":
        return cls([], [], [], [], [])

    def add_leaf(self, value: float) -> int:
        return self._add(-1, 0.0, -1, -1, value)

    def _add(self, feature: int, threshold: float, left: int, right: int, value: float) -> int:
        self.feature.append(feature)
        self.threshold.append(threshold)
        self.left.append(left)
        self.right.append(right)
        self.value.append(value)
        return len(self.feature) - 1


class DecisionTreeModel:
    """Greedy variance-reduction regression tree with midpoint thresholds.

    The split minimizing total child SSE wins; exact ties break toward the
    lower feature index, then the lower threshold. Unsplittable nodes
    (all-identical features, min_leaf, depth cap) become mean-value leaves.
    """

    def __init__(self, max_depth: int | None = None, min_leaf: int = 1):
        if max_depth is not None and max_depth < 0:
            raise BaselineError(f"max_depth must be >= 0, got {max_depth}")
        if min_leaf < 1:
            raise BaselineError(f"min_leaf must be >= 1, got {min_leaf}")
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.nodes: _TreeNodes | None = None
        self.n_features_: int | None = None
        self._feature_rng: np.random.Generator | None = None
        self._feature_fraction: float = 1.0

    def fit(self, x, y) -> "DecisionTreeModel":
        x, y = _as_xy(x, y)
        self.n_features_ = x.shape[1]
        self.nodes = _TreeNodes.empty()
        self._build(x, y, depth=0)
        return self

    def _candidate_features(self, n_features: int) -> np.ndarray:
        if self._feature_rng is None or self._feature_fraction >= 1.0:
            return np.arange(n_features)
        count = max(1, int(round(self._feature_fraction * n_features)))
        chosen = self._feature_rng.choice(n_features, size=count, replace=False)
        return np.sort(chosen)

    def _build(self, x: np.ndarray, y: np.ndarray, depth: int) -> int:
        n = y.shape[0]
        stop = (
            n < 2 * self.min_leaf
            or (self.max_depth is not None and depth >= self.max_depth)
            or np.all(y == y[0])
        )
        if not stop:
            feats = self._candidate_features(x.shape[1])
            split = _best_split(x[:, feats], y, self.min_leaf, feats)
        else:
            split = None
        if split is None:
            return self.nodes.add_leaf(float(y.mean()))
        feature, threshold = split
        mask = x[:, feature] <= threshold
        node = self.nodes._add(feature, threshold, -1, -1, float(y.mean()))
        self.nodes.left[node] = self._build(x[mask], y[mask], depth + 1)
        self.nodes.right[node] = self._build(x[~mask], y[~mask], depth + 1)
        return node

    def predict(self, x) -> np.ndarray:
        if self.nodes is None:
            raise BaselineError("model is not fitted")
        x = _check_width(x, self.n_features_)
        feature = np.array(self.nodes.feature)
        threshold = np.array(self.nodes.threshold)
        left = np.array(self.nodes.left)
        right = np.array(self.nodes.right)
        value = np.array(self.nodes.value)
        out = np.empty(x.shape[0])
        for i, row in enumerate(x):
            node = 0
            while feature[node] >= 0:
                node = left[node] if row[feature[node]] <= threshold[node] else right[node]
            out[i] = value[node]
        return out


def _best_split(
    x: np.ndarray, y: np.ndarray, min_leaf: int, feature_ids: np.ndarray
) -> tuple[int, float] | None:
    """Lowest-SSE valid split over the given feature columns, or None.

    x holds only the candidate columns; feature_ids maps them back to the
    original indices. Vectorized over all features at once.
    """
    n, n_feat = x.shape
    if n < 2 * min_leaf or n_feat == 0:
        return None
    order = np.argsort(x, axis=0, kind="stable")
    x_sorted = np.take_along_axis(x, order, axis=0)
    y_sorted = y[order]

    cum_y = np.cumsum(y_sorted, axis=0)
    cum_y2 = np.cumsum(y_sorted**2, axis=0)
    total_y = cum_y[-1]
    total_y2 = cum_y2[-1]

    # Split after sorted position i: left = [0..i], right = [i+1..n-1].
    sizes_left = np.arange(1, n, dtype=np.float64)[:, None]
    sizes_right = n - sizes_left
    sum_left = cum_y[:-1]
    sum2_left = cum_y2[:-1]
    sse_left = sum2_left - sum_left**2 / sizes_left
    sse_right = (total_y2 - sum2_left) - (total_y - sum_left) ** 2 / sizes_right
    sse = sse_left + sse_right

    valid = x_sorted[1:] > x_sorted[:-1]
    if min_leaf > 1:
        positions = np.arange(1, n)[:, None]
        valid &= (positions >= min_leaf) & (n - positions >= min_leaf)
    if not valid.any():
        return None
    sse = np.where(valid, sse, np.inf)

    best = np.min(sse)
    candidates = np.argwhere(sse == best)
    thresholds = (x_sorted[:-1] + x_sorted[1:]) / 2.0
    picks = sorted(
        (int(feature_ids[col]), float(thresholds[pos, col])) for pos, col in candidates
    )
    return picks[0]


class RandomForestModel:
    """Bootstrap-aggregated trees with optional per-split feature subsampling.

    The forest prediction is exactly the mean of its trees' predictions.
    """

    def __init__(
        self,
        n_trees: int = 100,
        max_depth: int | None = None,
        feature_fraction: float = 1.0,
        min_leaf: int = 1,
        seed: int = 0,
    ):
        if n_trees < 1:
            raise BaselineError(f"n_trees must be >= 1, got {n_trees}")
        if not 0.0 < feature_fraction <= 1.0:
            raise BaselineError(f"feature_fraction must lie in (0, 1], got {feature_fraction}")
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.feature_fraction = feature_fraction
        self.min_leaf = min_leaf
        self.seed = seed
        self.trees: list[DecisionTreeModel] = []
        self.n_features_: int | None = None

    def fit(self, x, y) -> "RandomForestModel":
        x, y = _as_xy(x, y)
        self.n_features_ = x.shape[1]
        root = np.random.SeedSequence(self.seed)
        self.trees = []
        for child in root.spawn(self.n_trees):
            rng = np.random.Generator(np.random.PCG64(child))
            indices = rng.integers(0, x.shape[0], size=x.shape[0])
            tree = DecisionTreeModel(max_depth=self.max_depth, min_leaf=self.min_leaf)
            tree._feature_rng = rng
            tree._feature_fraction = self.feature_fraction
            tree.fit(x[indices], y[indices])
            tree._feature_rng = None
            self.trees.append(tree)
        return self

    def predict(self, x) -> np.ndarray:
        if not self.trees:
            raise BaselineError("model is not fitted")
        x = _check_width(x, self.n_features_)
        return np.mean([tree.predict(x) for tree in self.trees], axis=0)


class GbtModel:
    """Gradient-boosted depth-limited trees on squared loss (XGBoost stand-in).

    Round zero predicts the training-target mean; each round fits a tree to
    the current residuals and adds it scaled by the shrinkage.
    """

    def __init__(
        self,
        rounds: int = 100,
        shrinkage: float = 0.1,
        max_depth: int = 3,
        min_leaf: int = 1,
    ):
        if rounds < 0:
            raise BaselineError(f"rounds must be >= 0, got {rounds}")
        if not 0.0 < shrinkage <= 1.0:
            raise BaselineError(f"shrinkage must lie in (0, 1], got {shrinkage}")
        self.rounds = rounds
        self.shrinkage = shrinkage
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.base_: float | None = None
        self.trees: list[DecisionTreeModel] = []
        self.train_mse_: list[float] = []
        self.n_features_: int | None = None

    def fit(self, x, y) -> "GbtModel":
        x, y = _as_xy(x, y)
        self.n_features_ = x.shape[1]
        self.base_ = float(y.mean())
        self.trees = []
        self.train_mse_ = [float(np.mean((y - self.base_) ** 2))]
        residual = y - self.base_
        for _ in range(self.rounds):
            tree = DecisionTreeModel(max_depth=self.max_depth, min_leaf=self.min_leaf)
            tree.fit(x, residual)
            residual = residual - self.shrinkage * tree.predict(x)
            self.trees.append(tree)
            self.train_mse_.append(float(np.mean(residual**2)))
        return self

    def predict(self, x) -> np.ndarray:
        if self.base_ is None:
            raise BaselineError("model is not fitted")
        x = _check_width(x, self.n_features_)
        out = np.full(x.shape[0], self.base_)
        for tree in self.trees:
            out += self.shrinkage * tree.predict(x)
        return out


BaselineModel = OlsModel | KnnModel | DecisionTreeModel | RandomForestModel | GbtModel

_VARIANTS = {
    "ols": OlsModel,
    "knn": KnnModel,
    "dt": DecisionTreeModel,
    "rf": RandomForestModel,
    "gbt": GbtModel,
}


def fit_baseline(variant: str, rows: Sequence[FeatureRow], **params) -> BaselineModel:
    """Fit one baseline variant (ols/knn/dt/rf/gbt) on feature rows."""
    from .lstm import rows_to_arrays

    if variant not in _VARIANTS:
        raise BaselineError(f"unknown baseline {variant!r}; expected one of {sorted(_VARIANTS)}")
    x, y = rows_to_arrays(rows)
    return _VARIANTS[variant](**params).fit(x, y)
