"""WXD1 on-disk dataset container.

Layout, all little-endian:

    magic "WXD1"
    u32   header length
    bytes canonical-JSON header {catalog, grid, n_times, seed, start_time,
                                 step_hours, has_mask, has_stats}
    f4    payload, [time][channel][lat][lon]
    u8    mask block, [lat][lon]            (if has_mask)
    u32+bytes canonical-JSON stats block    (if has_stats)
    u64   checksum of every preceding byte

Readers validate the checksum once on open (streamed, constant memory) and
then serve individual timesteps by seeking, so a dataset never has to fit
in memory.
"""

from __future__ import annotations

import json
import struct
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from .catalog import GridSpec, LandSeaMask, VariableCatalog
from .ioutil import (BadMagicError, FormatError, TruncatedError, canonical_json,
                     checksum64, read_exact, verify_trailing_checksum)
from .state import WeatherState
from .stats import ClimStats
from .synth import SynthResult

MAGIC = b"WXD1"


def write_dataset(path: str | Path, payload: np.ndarray, catalog: VariableCatalog,
                  grid: GridSpec, seed: int, start_time: str, step_hours: int = 1,
                  mask: LandSeaMask | None = None, stats: ClimStats | None = None) -> None:
    payload = np.ascontiguousarray(payload, dtype="<f4")
    t, c, h, w = payload.shape
    if (c, h, w) != (len(catalog), grid.n_lat, grid.n_lon):
        raise FormatError(f"payload shape {payload.shape} does not match catalog/grid")
    header = canonical_json({
        "catalog": catalog.to_json_obj(),
        "grid": {"n_lat": grid.n_lat, "n_lon": grid.n_lon},
        "n_times": t,
        "seed": int(seed),
        "start_time": start_time,
        "step_hours": int(step_hours),
        "has_mask": mask is not None,
        "has_stats": stats is not None,
    })
    import hashlib
    hasher = hashlib.blake2b(digest_size=8)
    with open(path, "wb") as f:
        def put(b: bytes):
            hasher.update(b)
            f.write(b)

        put(MAGIC)
        put(struct.pack("<I", len(header)))
        put(header)
        for ti in range(t):
            put(payload[ti].tobytes())
        if mask is not None:
            put(np.ascontiguousarray(mask.mask, dtype=np.uint8).tobytes())
        if stats is not None:
            sblock = canonical_json(stats.to_json_obj())
            put(struct.pack("<I", len(sblock)))
            put(sblock)
        f.write(hasher.digest())


def write_synth(path: str | Path, result: SynthResult, stats: ClimStats | None = None) -> None:
    write_dataset(path, result.payload, result.catalog, result.grid, result.seed,
                  result.start_time, result.step_hours, mask=result.mask, stats=stats)


class DatasetReader:
    """Seek-based reader for a WXD1 file; checksum-verified on open."""

    def __init__(self, path: str | Path, verify: bool = True):
        self.path = Path(path)
        self._f = open(self.path, "rb")
        try:
            self._parse(verify)
        except Exception:
            self._f.close()
            raise

    def _parse(self, verify: bool) -> None:
        f = self._f
        magic = read_exact(f, 4, "magic")
        if magic != MAGIC:
            raise BadMagicError(f"not a WXD1 file: magic {magic!r}")
        (hlen,) = struct.unpack("<I", read_exact(f, 4, "header length"))
        try:
            header = json.loads(read_exact(f, hlen, "header"))
        except (ValueError, UnicodeDecodeError) as e:
            raise FormatError(f"bad header JSON: {e}") from None

        # size arithmetic from raw header fields, before any semantic checks,
        # so corruption is reported as a format/checksum problem
        try:
            c = len(header["catalog"])
            h, w = int(header["grid"]["n_lat"]), int(header["grid"]["n_lon"])
            n_times = int(header["n_times"])
            has_mask = bool(header["has_mask"])
            has_stats = bool(header["has_stats"])
        except (KeyError, TypeError, ValueError) as e:
            raise FormatError(f"malformed header: {e}") from None
        if n_times < 0 or h <= 0 or w <= 0:
            raise FormatError("malformed header: negative dimensions")

        self._frame_bytes = c * h * w * 4
        self._payload_off = 8 + hlen
        mask_off = self._payload_off + n_times * self._frame_bytes
        expected = mask_off + (h * w if has_mask else 0)
        stats_off = expected
        f.seek(0, 2)
        actual = f.tell()
        slen = 0
        if has_stats:
            if actual < stats_off + 4:
                raise TruncatedError("file truncated at stats block")
            f.seek(stats_off)
            (slen,) = struct.unpack("<I", read_exact(f, 4, "stats length"))
            expected += 4 + slen
        if actual < expected + 8:
            raise TruncatedError(f"file is {actual} bytes, expected {expected + 8}")
        if actual > expected + 8:
            raise FormatError(f"{actual - expected - 8} unexpected trailing bytes")
        if verify:
            verify_trailing_checksum(f, expected)

        # checksum holds, so the header is exactly what the writer produced
        try:
            self.catalog = VariableCatalog.from_json_obj(header["catalog"])
            self.grid = GridSpec(h, w)
            self.n_times = n_times
            self.seed = int(header["seed"])
            self.start_time = str(header["start_time"])
            self.step_hours = int(header["step_hours"])
        except (KeyError, TypeError, ValueError) as e:
            raise FormatError(f"malformed header: {e}") from None

        self.mask = None
        self.stats = None
        if has_mask:
            f.seek(mask_off)
            raw = np.frombuffer(read_exact(f, h * w, "mask"), dtype=np.uint8)
            try:
                self.mask = LandSeaMask(raw.reshape(h, w).copy())
            except ValueError as e:
                raise FormatError(f"malformed mask block: {e}") from None
        if has_stats:
            f.seek(stats_off + 4)
            try:
                self.stats = ClimStats.from_json_obj(json.loads(read_exact(f, slen, "stats")))
            except TruncatedError:
                raise
            except (KeyError, TypeError, ValueError) as e:
                raise FormatError(f"malformed stats block: {e}") from None

    @property
    def timestamps(self) -> list[datetime]:
        t0 = datetime.fromisoformat(self.start_time)
        step = timedelta(hours=self.step_hours)
        return [t0 + i * step for i in range(self.n_times)]

    def read_raw(self, t: int) -> np.ndarray:
        """One timestep as a float32 [C, H, W] array, physical units."""
        if not 0 <= t < self.n_times:
            raise IndexError(f"timestep {t} out of range [0, {self.n_times})")
        self._f.seek(self._payload_off + t * self._frame_bytes)
        buf = read_exact(self._f, self._frame_bytes, f"timestep {t}")
        c, h, w = len(self.catalog), self.grid.n_lat, self.grid.n_lon
        return np.frombuffer(buf, dtype="<f4").reshape(c, h, w).copy()

    def read_state(self, indices) -> WeatherState:
        """A batch of timesteps as a physical-unit WeatherState."""
        indices = list(indices)
        data = np.stack([self.read_raw(t) for t in indices])
        ts = self.timestamps
        return WeatherState(data, self.catalog, normalized=False,
                            timestamps=[ts[i] for i in indices])

    def read_all(self) -> WeatherState:
        return self.read_state(range(self.n_times))

    def close(self) -> None:
        self._f.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
