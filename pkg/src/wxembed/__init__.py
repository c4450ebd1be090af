"""Weather-state embedding at desk scale.

Two-stage pipeline: a spectral-transformer autoencoder embeds a gridded
multi-channel prognostic state into a dense latent; cheap downstream heads
are trained on the frozen embedding to predict diagnostic variables, and a
full-depth bespoke baseline provides the comparison point. Everything runs
on a seeded synthetic atmosphere and is bit-reproducible.
"""

from .catalog import GridSpec, LandSeaMask, VariableCatalog, make_default_catalog
from .state import DiagnosticState, LatentState, WeatherState
from .stats import ClimStats, compute_clim_stats, denormalize, normalize

__version__ = "0.1.0"

__all__ = [
    "GridSpec", "LandSeaMask", "VariableCatalog", "make_default_catalog",
    "DiagnosticState", "LatentState", "WeatherState",
    "ClimStats", "compute_clim_stats", "normalize", "denormalize",
    "__version__",
]
