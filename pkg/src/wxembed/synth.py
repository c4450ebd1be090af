"""Seeded synthetic atmosphere, the desk-scale stand-in for reanalysis data.

Each prognostic channel is a sum of 16 random Fourier modes with a red
(k^-2) amplitude spectrum, advected by a per-channel drift velocity and
affinely mapped into that variable's plausible physical range. The two
diagnostic targets are analytic functions of prognostic channels, so a
downstream head genuinely can recover them from a faithful latent:

    tcc  = logistic(2 * z(r850) + z(tcwv) - 0.5)        z(.) = sample z-score
    stl1 = 0.9 * t2m + 5 K + smoothed unit-sigma noise  (defined everywhere,
                                                         evaluated over land)

The land-sea mask is the indicator of a low-frequency seeded field exceeding
its own median, which guarantees both classes. Everything is a deterministic
function of (grid, n_times, seed) via counter-derived RNG streams.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng
from .catalog import GridSpec, LandSeaMask, VariableCatalog, make_default_catalog

N_MODES = 16
# Highest |k| per axis the mode draw can pick. Desk grids stand in for coarse
# global grids, which are dominated by low synoptic wavenumbers; 3 keeps the
# fields smooth at 32x64 the way real reanalysis is smooth at that resolution.
MAX_WAVENUMBER = 3
_RANGE_GUARD = 1e-4  # clip diagnostics this fraction of the span inside their range


@dataclass
class SynthResult:
    payload: np.ndarray          # float32 [T, C, H, W], physical units
    catalog: VariableCatalog
    grid: GridSpec
    mask: LandSeaMask
    seed: int
    start_time: str
    step_hours: int


def _mode_field(gen: np.random.Generator, grid: GridSpec, n_times: int,
                kmax: int = MAX_WAVENUMBER) -> np.ndarray:
    """Advected sum of N_MODES red-spectrum Fourier modes, scaled to [-1, 1]."""
    h, w = grid.n_lat, grid.n_lon
    kmax_y = min(kmax, h // 2)
    kmax_x = min(kmax, w // 2)

    ky = np.empty(N_MODES, dtype=np.int64)
    kx = np.empty(N_MODES, dtype=np.int64)
    for m in range(N_MODES):
        while True:
            a = gen.integers(-kmax_y, kmax_y + 1)
            b = gen.integers(-kmax_x, kmax_x + 1)
            if a or b:
                ky[m], kx[m] = a, b
                break
    amp = gen.uniform(0.5, 1.5, N_MODES) / (ky.astype(np.float64) ** 2 + kx.astype(np.float64) ** 2)
    phase = gen.uniform(0.0, 2.0 * np.pi, N_MODES)
    vx = gen.uniform(-1.5, 1.5)
    vy = gen.uniform(-0.75, 0.75)

    yy = np.arange(h, dtype=np.float64)[:, None]
    xx = np.arange(w, dtype=np.float64)[None, :]
    tt = np.arange(n_times, dtype=np.float64)[:, None, None]

    field = np.zeros((n_times, h, w), dtype=np.float64)
    for m in range(N_MODES):
        spatial = 2.0 * np.pi * (kx[m] * xx / w + ky[m] * yy / h) + phase[m]
        omega = 2.0 * np.pi * (kx[m] * vx / w + ky[m] * vy / h)
        field += amp[m] * np.cos(spatial[None] + omega * tt)
    return field / amp.sum()


def _smoothed_noise(gen: np.random.Generator, grid: GridSpec, n_times: int,
                    sigma_freq: float = 3.0) -> np.ndarray:
    """Spatially low-passed white noise, rescaled to unit sample sigma."""
    white = gen.standard_normal((n_times, grid.n_lat, grid.n_lon))
    fy = np.fft.fftfreq(grid.n_lat) * grid.n_lat
    fx = np.fft.fftfreq(grid.n_lon) * grid.n_lon
    filt = np.exp(-(fy[:, None] ** 2 + fx[None, :] ** 2) / (2.0 * sigma_freq ** 2))
    smooth = np.fft.ifft2(np.fft.fft2(white, axes=(1, 2)) * filt[None], axes=(1, 2)).real
    return smooth / smooth.std()


def _land_sea_mask(seed: int, grid: GridSpec) -> LandSeaMask:
    gen = rng.stream(seed, rng.MASK_FIELD)
    h, w = grid.n_lat, grid.n_lon
    yy = np.arange(h, dtype=np.float64)[:, None]
    xx = np.arange(w, dtype=np.float64)[None, :]
    field = np.zeros((h, w), dtype=np.float64)
    for _ in range(6):
        while True:
            ky = gen.integers(-2, 3)
            kx = gen.integers(-2, 3)
            if ky or kx:
                break
        phase = gen.uniform(0.0, 2.0 * np.pi)
        field += np.cos(2.0 * np.pi * (kx * xx / w + ky * yy / h) + phase) / (ky * ky + kx * kx)
    return LandSeaMask((field > np.median(field)).astype(np.uint8))


def synth_dataset(grid: GridSpec, n_times: int, seed: int,
                  start_time: str = "2020-01-01T00:00", step_hours: int = 1,
                  catalog: VariableCatalog | None = None) -> SynthResult:
    """Generate the full [T, C, H, W] physical-unit payload plus mask."""
    if n_times < 1:
        raise ValueError("n_times must be >= 1")
    catalog = catalog or make_default_catalog()
    h, w = grid.n_lat, grid.n_lon
    payload = np.empty((n_times, len(catalog), h, w), dtype=np.float32)

    raw_by_name = {}
    for c, entry in enumerate(catalog.entries):
        if entry.role != "prognostic":
            continue
        gen = rng.stream(seed, rng.CHANNEL, c)
        raw = _mode_field(gen, grid, n_times)
        lo, hi = entry.data_range if entry.data_range else (-1.0, 1.0)
        mid, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
        payload[:, c] = (mid + half * raw).astype(np.float32)
        if entry.name in ("r850", "tcwv", "t2m"):
            raw_by_name[entry.name] = payload[:, c].astype(np.float64)

    names = catalog.names
    needs = (["r850", "tcwv"] if "tcc" in names else []) + (["t2m"] if "stl1" in names else [])
    for need in needs:
        if need not in raw_by_name:
            raise ValueError(f"catalog lacks {need!r}, required by the diagnostic recipes")

    def zscore(x):
        return (x - x.mean()) / x.std()

    if "tcc" in names:
        logit = 2.0 * zscore(raw_by_name["r850"]) + zscore(raw_by_name["tcwv"]) - 0.5
        tcc = 1.0 / (1.0 + np.exp(-logit))
        lo, hi = catalog.entry("tcc").data_range
        guard = _RANGE_GUARD * (hi - lo)
        payload[:, catalog.index("tcc")] = np.clip(tcc, lo + guard, hi - guard).astype(np.float32)
    if "stl1" in names:
        noise = _smoothed_noise(rng.stream(seed, rng.STL1_NOISE), grid, n_times)
        stl1 = 0.9 * raw_by_name["t2m"] + 5.0 + noise
        lo, hi = catalog.entry("stl1").data_range
        guard = _RANGE_GUARD * (hi - lo)
        payload[:, catalog.index("stl1")] = np.clip(stl1, lo + guard, hi - guard).astype(np.float32)

    return SynthResult(payload=payload, catalog=catalog, grid=grid,
                       mask=_land_sea_mask(seed, grid), seed=seed,
                       start_time=start_time, step_hours=step_hours)
