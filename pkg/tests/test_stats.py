import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wxembed import wxd
from wxembed.catalog import CatalogEntry, GridSpec, VariableCatalog
from wxembed.state import StateError, WeatherState
from wxembed.stats import ClimStats, StatsError, compute_clim_stats, denormalize, normalize


def _toy_reader(tmp_path, data):
    """Write a dataset whose channels are given [T, C, H, W] float32 data."""
    t, c, h, w = data.shape
    cat = VariableCatalog([CatalogEntry(name=f"ch{i}", level="surface", role="prognostic")
                           for i in range(c)])
    path = tmp_path / "toy.wxd"
    wxd.write_dataset(path, data.astype(np.float32), cat, GridSpec(h, w), seed=0,
                      start_time="2020-01-01T00:00")
    return wxd.DatasetReader(path)


def test_two_point_mean_sigma(tmp_path):
    data = np.zeros((2, 1, 8, 8), np.float32)
    data[0] = 1.0
    data[1] = 3.0
    r = _toy_reader(tmp_path, data)
    st_ = compute_clim_stats(r)
    assert st_.mean[0] == pytest.approx(2.0)
    assert st_.sigma[0] == pytest.approx(1.0)  # population sigma
    r.close()


def test_constant_channel_rejected(tmp_path):
    data = np.full((3, 2, 8, 8), 5.0, np.float32)
    data[:, 1] = np.random.default_rng(0).normal(size=(3, 8, 8))
    r = _toy_reader(tmp_path, data)
    with pytest.raises(StatsError, match="ch0"):
        compute_clim_stats(r)
    r.close()


def test_needs_two_timesteps(tmp_path):
    r = _toy_reader(tmp_path, np.random.default_rng(0).normal(size=(1, 1, 8, 8)).astype(np.float32))
    with pytest.raises(StatsError):
        compute_clim_stats(r)
    r.close()


def test_synthetic_stats_all_finite(small_dataset):
    with wxd.DatasetReader(small_dataset) as r:
        st_ = compute_clim_stats(r)
        assert np.all(np.isfinite(st_.mean))
        assert np.all(st_.sigma > 0)
        assert len(st_.names) == 56


def test_normalize_example():
    cat = VariableCatalog([CatalogEntry(name="t", level="surface", role="prognostic")])
    state = WeatherState(np.full((1, 1, 8, 8), 290.0, np.float32), cat)
    st_ = ClimStats(["t"], np.array([280.0]), np.array([10.0]))
    out = normalize(state, st_)
    assert out.normalized
    assert out.data == pytest.approx(1.0)


def test_double_normalize_rejected():
    cat = VariableCatalog([CatalogEntry(name="t", level="surface", role="prognostic")])
    state = WeatherState(np.ones((1, 1, 8, 8), np.float32), cat)
    st_ = ClimStats(["t"], np.array([0.0]), np.array([1.0]))
    once = normalize(state, st_)
    with pytest.raises(StateError):
        normalize(once, st_)
    with pytest.raises(StateError):
        denormalize(state, st_)


def test_channel_mismatch_rejected():
    cat = VariableCatalog([CatalogEntry(name="t", level="surface", role="prognostic")])
    state = WeatherState(np.ones((1, 1, 8, 8), np.float32), cat)
    st_ = ClimStats(["other"], np.array([0.0]), np.array([1.0]))
    with pytest.raises(StatsError, match="t"):
        normalize(state, st_)


@settings(max_examples=30, deadline=None)
@given(mean=st.floats(-1e3, 1e3), sigma=st.floats(1e-2, 1e3), seed=st.integers(0, 2**31))
def test_round_trip_identity(mean, sigma, seed):
    cat = VariableCatalog([CatalogEntry(name="t", level="surface", role="prognostic")])
    gen = np.random.default_rng(seed)
    data = (mean + sigma * gen.standard_normal((2, 1, 8, 8))).astype(np.float32)
    state = WeatherState(data, cat)
    st_ = ClimStats(["t"], np.array([mean]), np.array([sigma]))
    back = denormalize(normalize(state, st_), st_)
    scale = max(np.abs(data).max(), 1e-6)
    assert np.abs(back.data - data).max() <= 1e-5 * scale
    assert not back.normalized


def test_stats_of_normalized_are_standard(tmp_path, small_dataset):
    with wxd.DatasetReader(small_dataset) as r:
        st_ = compute_clim_stats(r)
        norm = normalize(r.read_all(), st_)
        path = tmp_path / "norm.wxd"
        # bypass range validation by flagging normalized data appropriately
        wxd.write_dataset(path, norm.data, r.catalog, r.grid, seed=1,
                          start_time=r.start_time)
    # re-reading claims physical units, so strip the diagnostics' range check
    # by computing stats directly from the raw payloads
    with wxd.DatasetReader(path, verify=True) as r2:
        st2 = compute_clim_stats(r2)
    assert np.abs(st2.mean).max() < 1e-6
    assert np.abs(st2.sigma - 1.0).max() < 1e-6


def test_sidecar_round_trip(tmp_path):
    st_ = ClimStats(["a", "b"], np.array([1.5, -2.25]), np.array([0.5, 3.0]))
    p = tmp_path / "stats.json"
    st_.save(p)
    again = ClimStats.load(p)
    assert again.names == st_.names
    assert np.array_equal(again.mean, st_.mean)
    assert np.array_equal(again.sigma, st_.sigma)


def test_sigma_positive_enforced():
    with pytest.raises(StatsError):
        ClimStats(["a"], np.array([0.0]), np.array([0.0]))
