import os

# Pin BLAS pools before numpy loads anywhere: the determinism contracts
# (bit-identical checkpoints, cache equivalence) are stated for a fixed
# thread count.
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import numpy as np
import pytest

from wxembed.catalog import GridSpec, make_default_catalog, make_surface_catalog
from wxembed.synth import synth_dataset
from wxembed import wxd


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """56-channel, 8x16, 6-step dataset; the workhorse for format/stats tests."""
    path = tmp_path_factory.mktemp("data") / "small.wxd"
    result = synth_dataset(GridSpec(8, 16), 6, seed=42)
    wxd.write_synth(path, result)
    return path


@pytest.fixture(scope="session")
def surface_dataset(tmp_path_factory):
    """9-channel surface-only dataset used by training smoke tests."""
    path = tmp_path_factory.mktemp("data") / "surface.wxd"
    result = synth_dataset(GridSpec(8, 16), 4, seed=42, catalog=make_surface_catalog())
    wxd.write_synth(path, result)
    return path


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
