"""Independent oracles and checkers shared across tests.

Everything here recomputes expected values through a different route than the
library code: plain loops, textbook formulas, exhaustive scans.
"""

from __future__ import annotations

import math

import numpy as np


def finite_difference_check(loss_and_grads, params: dict, args, h: float = 1e-5) -> float:
    """Worst relative error between analytic and central-difference gradients."""
    _, grads = loss_and_grads(*args)
    worst = 0.0
    for name, grad in grads.items():
        tensor = params[name]
        it = np.nditer(tensor, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            original = tensor[idx]
            tensor[idx] = original + h
            loss_plus, _ = loss_and_grads(*args)
            tensor[idx] = original - h
            loss_minus, _ = loss_and_grads(*args)
            tensor[idx] = original
            fd = (loss_plus - loss_minus) / (2.0 * h)
            denom = max(abs(fd), abs(grad[idx]), 1e-8)
            worst = max(worst, abs(fd - grad[idx]) / denom)
    return worst


def knn_brute_force(x_train: np.ndarray, y_train: np.ndarray, queries: np.ndarray, k: int) -> np.ndarray:
    """Plain-loop KNN: sort (distance, index) pairs, average the first k targets."""
    out = []
    for q in queries:
        scored = sorted(
            (math.dist(q, row), idx) for idx, row in enumerate(x_train)
        )
        out.append(float(np.mean([y_train[idx] for _, idx in scored[:k]])))
    return np.array(out)


def _sse(values: np.ndarray) -> float:
    return float(np.sum((values - values.mean()) ** 2))


def tree_oracle_fit(x: np.ndarray, y: np.ndarray, max_depth, min_leaf: int):
    """Exhaustive best-split regression tree as nested dicts.

    Scans every (feature, midpoint threshold) pair directly; ties break toward
    the lower feature index, then the lower threshold.
    """
    n = y.shape[0]
    if (
        n < 2 * min_leaf
        or (max_depth is not None and max_depth <= 0)
        or np.all(y == y[0])
    ):
        return {"value": float(y.mean())}

    best = None
    for feature in range(x.shape[1]):
        values = np.unique(x[:, feature])
        for lo, hi in zip(values, values[1:]):
            threshold = (lo + hi) / 2.0
            mask = x[:, feature] <= threshold
            if mask.sum() < min_leaf or (~mask).sum() < min_leaf:
                continue
            sse = _sse(y[mask]) + _sse(y[~mask])
            key = (sse, feature, threshold)
            if best is None or key < best:
                best = key
    if best is None:
        return {"value": float(y.mean())}
    _, feature, threshold = best
    mask = x[:, feature] <= threshold
    child_depth = None if max_depth is None else max_depth - 1
    return {
        "feature": feature,
        "threshold": threshold,
        "left": tree_oracle_fit(x[mask], y[mask], child_depth, min_leaf),
        "right": tree_oracle_fit(x[~mask], y[~mask], child_depth, min_leaf),
    }


def tree_oracle_predict(node: dict, row: np.ndarray) -> float:
    while "value" not in node:
        node = node["left"] if row[node["feature"]] <= node["threshold"] else node["right"]
    return node["value"]


def lstm_cell_oracle(params: dict, seq: np.ndarray) -> float:
    """Step-by-step scalar-math LSTM forward for one (T, D) sequence."""

    def sigmoid(v: float) -> float:
        return 1.0 / (1.0 + math.exp(-v))

    hidden = params["w_out"].shape[0]
    h = [0.0] * hidden
    c = [0.0] * hidden
    for t in range(seq.shape[0]):
        x_t = seq[t]
        z = [0.0] * (4 * hidden)
        for row in range(4 * hidden):
            acc = params["b"][row]
            for col in range(seq.shape[1]):
                acc += params["W"][row, col] * x_t[col]
            for col in range(hidden):
                acc += params["U"][row, col] * h[col]
            z[row] = acc
        new_h = [0.0] * hidden
        new_c = [0.0] * hidden
        for j in range(hidden):
            i_g = sigmoid(z[j])
            f_g = sigmoid(z[hidden + j])
            g_g = math.tanh(z[2 * hidden + j])
            o_g = sigmoid(z[3 * hidden + j])
            new_c[j] = f_g * c[j] + i_g * g_g
            new_h[j] = o_g * math.tanh(new_c[j])
        h, c = new_h, new_c
    out = params["b_out"][0]
    for j in range(hidden):
        out += params["w_out"][j] * h[j]
    return float(out)


def ols_lstsq_oracle(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float]:
    """Least-squares fit through numpy's lstsq (SVD route)."""
    design = np.hstack([np.ones((x.shape[0], 1)), x])
    beta, *_ = np.linalg.lstsq(design, y, rcond=None)
    return beta[1:], float(beta[0])
