"""Grid geometry, the variable catalog, and the land-sea mask.

The default catalog is the fixed 54-variable prognostic set (9 surface
variables plus 9 pressure levels x 5 upper-air variables) together with two
diagnostic targets: top-level soil temperature (stl1, land-masked, no
activation) and total cloud cover (tcc, sigmoid-activated, unmasked).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class CatalogError(ValueError):
    pass


SURFACE_VARS = ["u10", "v10", "t2m", "d2m", "msl", "sp", "u100", "v100", "tcwv"]
PRESSURE_LEVELS = [1000, 925, 850, 700, 500, 300, 250, 200, 50]
LEVEL_VARS = ["t", "u", "v", "z", "r"]

# plausible physical ranges for the synthetic world, also used as the SSIM
# dynamic range for reconstruction metrics
SURFACE_RANGES = {
    "u10": (-25.0, 25.0),
    "v10": (-25.0, 25.0),
    "t2m": (245.0, 305.0),
    "d2m": (235.0, 300.0),
    "msl": (95000.0, 105000.0),
    "sp": (50000.0, 105000.0),
    "u100": (-35.0, 35.0),
    "v100": (-35.0, 35.0),
    "tcwv": (0.0, 60.0),
}

# standard-atmosphere-ish geopotential heights (m) per level for the z ranges
_STD_HEIGHT = {1000: 110.0, 925: 760.0, 850: 1460.0, 700: 3010.0, 500: 5570.0,
               300: 9160.0, 250: 10360.0, 200: 11780.0, 50: 20580.0}
_T_RANGES = {1000: (255.0, 310.0), 925: (250.0, 305.0), 850: (245.0, 300.0),
             700: (240.0, 290.0), 500: (230.0, 270.0), 300: (210.0, 240.0),
             250: (205.0, 235.0), 200: (200.0, 230.0), 50: (195.0, 230.0)}


def _level_range(var: str, level: int) -> tuple[float, float]:
    if var == "t":
        return _T_RANGES[level]
    if var in ("u", "v"):
        return (-60.0, 60.0)
    if var == "z":
        mid = 9.80665 * _STD_HEIGHT[level]
        half = 0.04 * mid + 2000.0
        return (mid - half, mid + half)
    if var == "r":
        return (0.0, 100.0)
    raise CatalogError(f"unknown pressure-level variable {var!r}")


@dataclass(frozen=True)
class GridSpec:
    """Latitude-longitude grid dimensions."""

    n_lat: int
    n_lon: int
    patch_divisible_hint: int | None = None

    def __post_init__(self):
        if self.n_lat < 8 or self.n_lon < 8:
            raise CatalogError(f"grid must be at least 8x8, got {self.n_lat}x{self.n_lon}")
        hint = self.patch_divisible_hint
        if hint is not None and (self.n_lat % hint or self.n_lon % hint):
            raise CatalogError(f"grid {self.n_lat}x{self.n_lon} not divisible by hint {hint}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_lat, self.n_lon)


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    level: str | int            # "surface" or pressure in hPa
    role: str                   # "prognostic" | "diagnostic"
    data_range: tuple[float, float] | None = None
    activation: str = "none"    # "none" | "sigmoid"
    mask: str = "none"          # "none" | "land-sea"

    def __post_init__(self):
        if self.role not in ("prognostic", "diagnostic"):
            raise CatalogError(f"bad role {self.role!r} for {self.name!r}")
        if self.activation not in ("none", "sigmoid"):
            raise CatalogError(f"bad activation {self.activation!r} for {self.name!r}")
        if self.mask not in ("none", "land-sea"):
            raise CatalogError(f"bad mask {self.mask!r} for {self.name!r}")
        if self.role == "diagnostic" and self.data_range is None:
            raise CatalogError(f"diagnostic entry {self.name!r} needs a data_range")
        if self.data_range is not None and not self.data_range[0] < self.data_range[1]:
            raise CatalogError(f"empty data_range for {self.name!r}")


class VariableCatalog:
    """Ordered, name-unique list of catalog entries bound to channel indices."""

    def __init__(self, entries: list[CatalogEntry]):
        names = [e.name for e in entries]
        if len(set(names)) != len(names):
            raise CatalogError("catalog names must be unique")
        self.entries = list(entries)
        self._index = {e.name: i for i, e in enumerate(entries)}

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __eq__(self, other) -> bool:
        return isinstance(other, VariableCatalog) and self.entries == other.entries

    def index(self, name: str) -> int:
        if name not in self._index:
            raise CatalogError(f"variable {name!r} not in catalog")
        return self._index[name]

    def entry(self, name: str) -> CatalogEntry:
        return self.entries[self.index(name)]

    @property
    def names(self) -> list[str]:
        return [e.name for e in self.entries]

    def prognostic_indices(self) -> list[int]:
        return [i for i, e in enumerate(self.entries) if e.role == "prognostic"]

    def diagnostic_indices(self) -> list[int]:
        return [i for i, e in enumerate(self.entries) if e.role == "diagnostic"]

    def to_json_obj(self) -> list[dict]:
        out = []
        for e in self.entries:
            out.append({
                "name": e.name,
                "level": e.level,
                "role": e.role,
                "data_range": list(e.data_range) if e.data_range else None,
                "activation": e.activation,
                "mask": e.mask,
            })
        return out

    @classmethod
    def from_json_obj(cls, obj: list[dict]) -> "VariableCatalog":
        entries = []
        for d in obj:
            rng = d.get("data_range")
            entries.append(CatalogEntry(
                name=d["name"], level=d["level"], role=d["role"],
                data_range=tuple(rng) if rng else None,
                activation=d.get("activation", "none"), mask=d.get("mask", "none"),
            ))
        return cls(entries)


def make_default_catalog() -> VariableCatalog:
    """54 prognostic entries (surface block, then 1000..50 hPa x t,u,v,z,r)
    plus the stl1 and tcc diagnostic targets."""
    entries = []
    for name in SURFACE_VARS:
        entries.append(CatalogEntry(name=name, level="surface", role="prognostic",
                                    data_range=SURFACE_RANGES[name]))
    for level in PRESSURE_LEVELS:
        for var in LEVEL_VARS:
            entries.append(CatalogEntry(name=f"{var}{level}", level=level, role="prognostic",
                                        data_range=_level_range(var, level)))
    entries.append(CatalogEntry(name="stl1", level="surface", role="diagnostic",
                                data_range=(220.0, 290.0), activation="none", mask="land-sea"))
    entries.append(CatalogEntry(name="tcc", level="surface", role="diagnostic",
                                data_range=(0.0, 1.0), activation="sigmoid", mask="none"))
    return VariableCatalog(entries)


def make_surface_catalog() -> VariableCatalog:
    """Just the 9 surface prognostic variables; used by tiny smoke configs."""
    return VariableCatalog([
        CatalogEntry(name=n, level="surface", role="prognostic", data_range=SURFACE_RANGES[n])
        for n in SURFACE_VARS])


def make_level_catalog(levels: list[int]) -> VariableCatalog:
    """Surface block plus selected pressure levels, with both diagnostic targets.

    The desk-scale parity benchmark uses levels=[850]: small enough that the
    embedding can be near-lossless at desk dims, while keeping every channel
    the diagnostic recipes read (r850, tcwv, t2m).
    """
    entries = [CatalogEntry(name=n, level="surface", role="prognostic",
                            data_range=SURFACE_RANGES[n]) for n in SURFACE_VARS]
    for level in levels:
        if level not in PRESSURE_LEVELS:
            raise CatalogError(f"unknown pressure level {level}")
        for var in LEVEL_VARS:
            entries.append(CatalogEntry(name=f"{var}{level}", level=level, role="prognostic",
                                        data_range=_level_range(var, level)))
    entries.append(CatalogEntry(name="stl1", level="surface", role="diagnostic",
                                data_range=(220.0, 290.0), activation="none", mask="land-sea"))
    entries.append(CatalogEntry(name="tcc", level="surface", role="diagnostic",
                                data_range=(0.0, 1.0), activation="sigmoid", mask="none"))
    return VariableCatalog(entries)


@dataclass
class LandSeaMask:
    """Binary [H, W] field, 1 = land."""

    mask: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.mask)
        if m.ndim != 2:
            raise CatalogError("mask must be 2-D")
        vals = np.unique(m)
        if not np.all(np.isin(vals, (0, 1))):
            raise CatalogError("mask values must be 0 or 1")
        self.mask = m.astype(np.uint8)

    @property
    def n_land(self) -> int:
        return int(self.mask.sum())

    @property
    def n_sea(self) -> int:
        return int(self.mask.size - self.mask.sum())
