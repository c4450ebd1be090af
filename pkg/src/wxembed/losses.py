"""Masked mean-squared-error loss with its exact gradient."""

from __future__ import annotations

import numpy as np


class LossError(ValueError):
    pass


def mse_loss(pred: np.ndarray, target: np.ndarray, mask: np.ndarray | None = None):
    """Mean of squared error over unmasked cells.

    `mask` is a [H, W] (or broadcastable) include-mask; the gradient is
    2*(pred-target)/N at unmasked cells and 0 elsewhere. Returns
    (scalar loss, gradient w.r.t. pred).
    """
    if pred.shape != target.shape:
        raise LossError(f"shape mismatch: pred {pred.shape} vs target {target.shape}")
    diff = pred - target
    if mask is None:
        n = diff.size
        loss = float(np.mean(diff.astype(np.float64) ** 2))
        grad = (2.0 / n) * diff
        return loss, grad
    m = np.broadcast_to(np.asarray(mask, dtype=pred.dtype), pred.shape)
    n = float(m.sum())
    if n == 0:
        raise LossError("mask excludes every cell")
    masked = diff * m
    loss = float(np.sum((masked.astype(np.float64)) ** 2) / n)
    grad = (2.0 / n) * masked
    return loss, grad
