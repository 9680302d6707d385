"""Mini-batch gradient descent with Adam-style per-parameter adaptive scaling."""

from __future__ import annotations

import math
from typing import Mapping

import numpy as np


class Adam:
    """Adam update over a dict of named parameter arrays (updated in place)."""

    def __init__(
        self,
        params: Mapping[str, np.ndarray],
        learning_rate: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        if learning_rate <= 0:
            raise ValueError(f"learning rate must be > 0, got {learning_rate}")
        self.params = dict(params)
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = {k: np.zeros_like(v) for k, v in self.params.items()}
        self._v = {k: np.zeros_like(v) for k, v in self.params.items()}

    def step(self, grads: Mapping[str, np.ndarray]) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for name, grad in grads.items():
            m = self._m[name]
            v = self._v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad * grad
            self.params[name] -= self.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def clip_global_norm(grads: Mapping[str, np.ndarray], max_norm: float) -> float:
    """Scale all gradients in place so their global L2 norm is <= max_norm.

    Returns the pre-clip norm. ``max_norm <= 0`` disables clipping.
    """
    total = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if max_norm > 0 and total > max_norm and total > 0:
        scale = max_norm / total
        for g in grads.values():
            g *= scale
    return total
