"""Forecast verification metrics: grid RMSE and Gaussian-window SSIM.

RMSE is unweighted over the grid (no latitude weighting; a cos-lat variant
sits behind a flag for real-sphere grids). SSIM uses the standard 11x11
Gaussian window (sigma 1.5) with C1 = (0.01 L)^2, C2 = (0.03 L)^2, where L
is the variable's dynamic range; windows whose center cell is masked out
are excluded from the mean. Grids smaller than the window fall back to the
largest odd window that fits, with a warning, and the Gaussian sigma is
scaled proportionally (sigma * win / 11).
"""

from __future__ import annotations

import warnings

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class MetricError(ValueError):
    pass


def rmse(pred: np.ndarray, truth: np.ndarray, mask: np.ndarray | None = None,
         lat_weighted: bool = False, lats_deg: np.ndarray | None = None) -> float:
    """Root mean squared error over unmasked cells of two [H, W] fields."""
    if pred.shape != truth.shape:
        raise MetricError(f"shape mismatch: {pred.shape} vs {truth.shape}")
    d2 = (pred.astype(np.float64) - truth.astype(np.float64)) ** 2
    if lat_weighted:
        if lats_deg is None:
            raise MetricError("lat_weighted rmse needs lats_deg")
        w = np.cos(np.deg2rad(np.asarray(lats_deg, dtype=np.float64)))[:, None]
        w = np.broadcast_to(w, pred.shape)
    else:
        w = np.ones_like(d2)
    if mask is not None:
        w = w * np.asarray(mask, dtype=np.float64)
    tot = w.sum()
    if tot == 0:
        raise MetricError("mask excludes every cell")
    return float(np.sqrt((d2 * w).sum() / tot))


def gaussian_window(size: int, sigma: float) -> np.ndarray:
    r = (size - 1) / 2.0
    g = np.exp(-((np.arange(size) - r) ** 2) / (2.0 * sigma * sigma))
    k = np.outer(g, g)
    return k / k.sum()


def ssim(pred: np.ndarray, truth: np.ndarray, data_range: float,
         win_size: int = 11, sigma: float = 1.5, k1: float = 0.01, k2: float = 0.03,
         mask: np.ndarray | None = None) -> float:
    """Mean local SSIM over valid window positions of two [H, W] fields."""
    if pred.shape != truth.shape:
        raise MetricError(f"shape mismatch: {pred.shape} vs {truth.shape}")
    if data_range <= 0:
        raise MetricError("data_range must be positive")
    if win_size % 2 == 0:
        raise MetricError("win_size must be odd")
    h, w = pred.shape
    smallest = min(h, w)
    if smallest < win_size:
        fallback = smallest if smallest % 2 else smallest - 1
        if fallback < 3:
            raise MetricError(f"grid {h}x{w} too small for SSIM")
        warnings.warn(f"grid {h}x{w} smaller than {win_size}x{win_size} SSIM window; "
                      f"using {fallback}x{fallback}", stacklevel=2)
        sigma = sigma * fallback / win_size
        win_size = fallback

    x = pred.astype(np.float64)
    y = truth.astype(np.float64)
    kern = gaussian_window(win_size, sigma)

    def filt(a: np.ndarray) -> np.ndarray:
        return np.tensordot(sliding_window_view(a, (win_size, win_size)), kern, axes=([2, 3], [0, 1]))

    mu_x = filt(x)
    mu_y = filt(y)
    var_x = filt(x * x) - mu_x * mu_x
    var_y = filt(y * y) - mu_y * mu_y
    cov = filt(x * y) - mu_x * mu_y

    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    ssim_map = ((2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)) / \
               ((mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2))

    if mask is None:
        return float(ssim_map.mean())
    r = win_size // 2
    centers = np.asarray(mask, dtype=bool)[r:h - r, r:w - r]
    if not centers.any():
        raise MetricError("mask excludes every window center")
    return float(ssim_map[centers].mean())
