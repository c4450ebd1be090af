import hashlib

import numpy as np
import pytest

from wxembed.catalog import GridSpec, make_default_catalog, make_level_catalog
from wxembed.synth import synth_dataset
from wxembed import wxd


def test_same_seed_byte_identical(tmp_path):
    a = synth_dataset(GridSpec(8, 16), 4, seed=7)
    b = synth_dataset(GridSpec(8, 16), 4, seed=7)
    pa, pb = tmp_path / "a.wxd", tmp_path / "b.wxd"
    wxd.write_synth(pa, a)
    wxd.write_synth(pb, b)
    assert pa.read_bytes() == pb.read_bytes()


def test_payload_size_example(tmp_path):
    result = synth_dataset(GridSpec(8, 16), 4, seed=42)
    assert result.payload.nbytes == 4 * 56 * 8 * 16 * 4
    path = tmp_path / "d.wxd"
    wxd.write_synth(path, result)
    with wxd.DatasetReader(path) as r:
        assert r.n_times == 4 and len(r.catalog) == 56


def test_distinct_seeds_distinct_payloads():
    digests = set()
    for seed in range(5):
        result = synth_dataset(GridSpec(8, 16), 2, seed=seed)
        digests.add(hashlib.blake2b(result.payload.tobytes(), digest_size=8).hexdigest())
    assert len(digests) == 5


def test_tcc_strictly_inside_unit_interval():
    cat = make_default_catalog()
    result = synth_dataset(GridSpec(16, 16), 6, seed=42)
    tcc = result.payload[:, cat.index("tcc")]
    assert tcc.min() > 0.0
    assert tcc.max() < 1.0


def test_stl1_within_data_range():
    cat = make_default_catalog()
    result = synth_dataset(GridSpec(16, 16), 6, seed=42)
    stl1 = result.payload[:, cat.index("stl1")]
    lo, hi = cat.entry("stl1").data_range
    assert lo <= stl1.min() and stl1.max() <= hi


def test_mask_has_both_classes():
    for seed in range(3):
        result = synth_dataset(GridSpec(8, 16), 1, seed=seed)
        assert result.mask.n_land > 0
        assert result.mask.n_sea > 0


def test_all_values_finite():
    result = synth_dataset(GridSpec(8, 16), 3, seed=3)
    assert np.all(np.isfinite(result.payload))


def test_degenerate_grid_rejected():
    from wxembed.catalog import CatalogError
    with pytest.raises(CatalogError):
        synth_dataset(GridSpec(4, 16), 2, seed=0)
    with pytest.raises(ValueError):
        synth_dataset(GridSpec(8, 16), 0, seed=0)


def test_reduced_catalog_skips_missing_recipes():
    cat = make_level_catalog([850])
    result = synth_dataset(GridSpec(8, 16), 2, seed=1, catalog=cat)
    assert result.payload.shape[1] == 16


def test_prognostic_channels_move_in_time():
    result = synth_dataset(GridSpec(8, 16), 3, seed=5)
    assert not np.array_equal(result.payload[0, 0], result.payload[1, 0])
