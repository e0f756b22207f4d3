"""Finite-difference audit of the hand-written backward pass.

Runs in double precision with dropout disabled; compares the analytic
gradient of the mean cross-entropy against central differences for every
parameter component and reports the worst relative error.
"""

from __future__ import annotations

import numpy as np

from coachkit.neural.model import NeuralError, TransformerClassifier


def grad_check(
    model: TransformerClassifier,
    ids: np.ndarray,
    mask: np.ndarray,
    labels: np.ndarray,
    epsilon: float = 1e-5,
) -> float:
    """Max over parameters of |g_a - g_fd| / max(1e-12, |g_a| + |g_fd|)."""
    if epsilon <= 0:
        raise NeuralError(f"epsilon must be positive, got {epsilon}")
    if model.dtype != np.float64:
        raise NeuralError("grad_check requires a float64 model")
    if model.config.dropout_rate != 0.0:
        raise NeuralError("grad_check requires dropout_rate=0")

    def loss_only() -> float:
        loss, _, _ = model.loss_and_grads(ids, mask, labels, training=False)
        return loss

    _, analytic, _ = model.loss_and_grads(ids, mask, labels, training=False)
    worst = 0.0
    for name in model.param_names():
        param = model.params[name]
        grad = analytic[name]
        flat = param.reshape(-1)
        gflat = grad.reshape(-1)
        for j in range(flat.size):
            original = flat[j]
            flat[j] = original + epsilon
            up = loss_only()
            flat[j] = original - epsilon
            down = loss_only()
            flat[j] = original
            numeric = (up - down) / (2.0 * epsilon)
            denom = max(1e-12, abs(gflat[j]) + abs(numeric))
            worst = max(worst, abs(gflat[j] - numeric) / denom)
    return worst
