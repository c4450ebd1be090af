"""Per-channel climatological statistics and z-score normalization.

Statistics are accumulated in float64 regardless of the on-disk dtype;
sigma is the population standard deviation (divide by N), so normalizing
the very sample the stats came from yields unit variance exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .state import StateError, WeatherState


class StatsError(ValueError):
    pass


@dataclass
class ClimStats:
    names: list[str]
    mean: np.ndarray    # float64 [C]
    sigma: np.ndarray   # float64 [C]

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.sigma = np.asarray(self.sigma, dtype=np.float64)
        if not (len(self.names) == self.mean.size == self.sigma.size):
            raise StatsError("names/mean/sigma length mismatch")
        if np.any(self.sigma <= 0.0):
            bad = self.names[int(np.argmin(self.sigma))]
            raise StatsError(f"non-positive sigma for channel {bad!r}")
        self._index = {n: i for i, n in enumerate(self.names)}

    def for_channel(self, name: str) -> tuple[float, float]:
        if name not in self._index:
            raise StatsError(f"no stats for channel {name!r}")
        i = self._index[name]
        return float(self.mean[i]), float(self.sigma[i])

    def subset(self, names: list[str]) -> "ClimStats":
        idx = [self._index[n] if n in self._index else -1 for n in names]
        if -1 in idx:
            raise StatsError(f"no stats for channel {names[idx.index(-1)]!r}")
        return ClimStats(list(names), self.mean[idx], self.sigma[idx])

    def to_json_obj(self) -> dict:
        return {"channels": [
            {"name": n, "mean": float(m), "sigma": float(s)}
            for n, m, s in zip(self.names, self.mean, self.sigma)
        ]}

    @classmethod
    def from_json_obj(cls, obj: dict) -> "ClimStats":
        chans = obj["channels"]
        return cls([c["name"] for c in chans],
                   np.array([c["mean"] for c in chans]),
                   np.array([c["sigma"] for c in chans]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_obj(), sort_keys=True, separators=(",", ":")) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "ClimStats":
        return cls.from_json_obj(json.loads(Path(path).read_text()))


def compute_clim_stats(reader, channels=None, time_indices=None) -> ClimStats:
    """Streaming per-channel mean and population sigma over (time, lat, lon).

    `reader` is a wxd.DatasetReader (or anything with .n_times, .catalog and
    .read_raw(t)). `channels` selects by name; `time_indices` restricts the
    climatology window (e.g. to the training split).
    """
    names = list(channels) if channels is not None else reader.catalog.names
    idx = [reader.catalog.index(n) for n in names]
    times = list(time_indices) if time_indices is not None else list(range(reader.n_times))
    if len(times) < 2:
        raise StatsError("need at least 2 timesteps for climatological stats")

    c = len(idx)
    s1 = np.zeros(c, dtype=np.float64)
    s2 = np.zeros(c, dtype=np.float64)
    n_cells = 0
    for t in times:
        frame = reader.read_raw(t)[idx].astype(np.float64)   # [c, H, W]
        s1 += frame.sum(axis=(1, 2))
        s2 += (frame * frame).sum(axis=(1, 2))
        n_cells += frame.shape[1] * frame.shape[2]

    mean = s1 / n_cells
    var = s2 / n_cells - mean * mean
    floor = 1e-10 * np.maximum(1.0, mean * mean)
    for i in range(c):
        if var[i] <= floor[i]:
            raise StatsError(f"zero-variance channel {names[i]!r} (var={var[i]:.3e})")
    return ClimStats(names, mean, np.sqrt(var))


def normalize(state: WeatherState, stats: ClimStats) -> WeatherState:
    """z-score every channel; errors if the state is already normalized."""
    if state.normalized:
        raise StateError("state is already normalized")
    sub = stats.subset(state.catalog.names)
    mean = sub.mean.reshape(1, -1, 1, 1)
    sigma = sub.sigma.reshape(1, -1, 1, 1)
    out = ((state.data - mean) / sigma).astype(state.data.dtype)
    return WeatherState(out, state.catalog, normalized=True, timestamps=state.timestamps)


def denormalize(state: WeatherState, stats: ClimStats) -> WeatherState:
    """Exact inverse of `normalize` up to float rounding."""
    if not state.normalized:
        raise StateError("state is not normalized")
    sub = stats.subset(state.catalog.names)
    mean = sub.mean.reshape(1, -1, 1, 1)
    sigma = sub.sigma.reshape(1, -1, 1, 1)
    out = (state.data * sigma + mean).astype(state.data.dtype)
    return WeatherState(out, state.catalog, normalized=False, timestamps=state.timestamps)


def normalize_channel(arr: np.ndarray, stats: ClimStats, name: str) -> np.ndarray:
    mean, sigma = stats.for_channel(name)
    return ((arr - mean) / sigma).astype(arr.dtype)


def denormalize_channel(arr: np.ndarray, stats: ClimStats, name: str) -> np.ndarray:
    mean, sigma = stats.for_channel(name)
    return (arr * sigma + mean).astype(arr.dtype)
