"""Batched field containers passed between the data, model, and eval layers."""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime

import numpy as np

from .catalog import VariableCatalog


class StateError(ValueError):
    pass


@dataclass
class WeatherState:
    """A batch of gridded fields, [B, C, H, W], bound to a variable catalog.

    `normalized` flags z-scored data; physical-unit batches are range-checked
    on their diagnostic channels at construction.
    """

    data: np.ndarray = field(repr=False)
    catalog: VariableCatalog = field(repr=False)
    normalized: bool = False
    timestamps: list[datetime] | None = None

    def __post_init__(self):
        if self.data.ndim != 4:
            raise StateError(f"expected [B, C, H, W], got shape {self.data.shape}")
        if self.data.shape[1] != len(self.catalog):
            raise StateError(f"{self.data.shape[1]} channels vs {len(self.catalog)} catalog entries")
        if self.timestamps is not None and len(self.timestamps) != self.data.shape[0]:
            raise StateError("one timestamp per batch element required")
        if not np.all(np.isfinite(self.data)):
            raise StateError("non-finite values in weather state")
        if not self.normalized:
            for i in self.catalog.diagnostic_indices():
                entry = self.catalog.entries[i]
                lo, hi = entry.data_range
                ch = self.data[:, i]
                if ch.min() < lo or ch.max() > hi:
                    raise StateError(
                        f"diagnostic {entry.name!r} outside data_range [{lo}, {hi}]: "
                        f"[{ch.min():.6g}, {ch.max():.6g}]")

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return self.data.shape

    def channel(self, name: str) -> np.ndarray:
        return self.data[:, self.catalog.index(name)]


@dataclass
class LatentState:
    """Dense token-grid embedding, [B, L, H/p, W/p]."""

    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.data.ndim != 4:
            raise StateError(f"expected [B, L, h, w], got shape {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise StateError("non-finite values in latent state")

    @property
    def shape(self):
        return self.data.shape


@dataclass
class DiagnosticState:
    """Model output for diagnostic targets, [B, C_out, H, W]."""

    data: np.ndarray = field(repr=False)
    activation: str = "none"
    mask: str = "none"

    def __post_init__(self):
        if self.data.ndim != 4:
            raise StateError(f"expected [B, C, H, W], got shape {self.data.shape}")
        if self.activation == "sigmoid":
            if self.data.min() <= 0.0 or self.data.max() >= 1.0:
                raise StateError("sigmoid-activated output must lie strictly in (0, 1)")
