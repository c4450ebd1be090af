import numpy as np
import pytest

from wxembed import wxd
from wxembed.catalog import GridSpec
from wxembed.ioutil import BadMagicError, ChecksumError, FormatError, TruncatedError
from wxembed.stats import compute_clim_stats
from wxembed.synth import synth_dataset


def _rewrite(reader, path):
    payload = np.stack([reader.read_raw(t) for t in range(reader.n_times)])
    wxd.write_dataset(path, payload, reader.catalog, reader.grid, reader.seed,
                      reader.start_time, reader.step_hours, mask=reader.mask,
                      stats=reader.stats)


def test_write_read_write_byte_identical(small_dataset, tmp_path):
    with wxd.DatasetReader(small_dataset) as r:
        out = tmp_path / "copy.wxd"
        _rewrite(r, out)
    assert out.read_bytes() == small_dataset.read_bytes()


def test_round_trip_with_stats_block(tmp_path):
    result = synth_dataset(GridSpec(8, 16), 3, seed=9)
    with_stats = tmp_path / "s.wxd"
    wxd.write_synth(with_stats, result)
    with wxd.DatasetReader(with_stats) as r:
        st = compute_clim_stats(r)
    wxd.write_synth(with_stats.with_suffix(".2.wxd"), result, stats=st)
    with wxd.DatasetReader(with_stats.with_suffix(".2.wxd")) as r2:
        assert r2.stats is not None
        assert r2.stats.names == st.names
        assert np.array_equal(r2.stats.mean, st.mean)
    out = tmp_path / "copy.wxd"
    with wxd.DatasetReader(with_stats.with_suffix(".2.wxd")) as r2:
        _rewrite(r2, out)
    assert out.read_bytes() == with_stats.with_suffix(".2.wxd").read_bytes()


def test_single_byte_corruption_always_detected(small_dataset, tmp_path):
    blob = bytearray(small_dataset.read_bytes())
    # corrupt a sample of positions covering header, payload, mask, checksum
    positions = list(range(0, len(blob), max(1, len(blob) // 64))) + [len(blob) - 1, len(blob) - 8]
    for pos in positions:
        corrupted = bytearray(blob)
        corrupted[pos] ^= 0x40
        p = tmp_path / "bad.wxd"
        p.write_bytes(bytes(corrupted))
        with pytest.raises(FormatError):
            with wxd.DatasetReader(p):
                pass


def test_bad_magic_distinguished(small_dataset, tmp_path):
    blob = bytearray(small_dataset.read_bytes())
    blob[0:4] = b"NOPE"
    p = tmp_path / "bad.wxd"
    p.write_bytes(bytes(blob))
    with pytest.raises(BadMagicError):
        wxd.DatasetReader(p)


def test_truncation_distinguished(small_dataset, tmp_path):
    blob = small_dataset.read_bytes()
    p = tmp_path / "trunc.wxd"
    p.write_bytes(blob[: len(blob) // 2])
    with pytest.raises(TruncatedError):
        wxd.DatasetReader(p)


def test_payload_corruption_is_checksum_error(small_dataset, tmp_path):
    blob = bytearray(small_dataset.read_bytes())
    blob[len(blob) // 2] ^= 0x01  # middle of the payload
    p = tmp_path / "bad.wxd"
    p.write_bytes(bytes(blob))
    with pytest.raises(ChecksumError):
        wxd.DatasetReader(p)


def test_timestep_out_of_range(small_dataset):
    with wxd.DatasetReader(small_dataset) as r:
        with pytest.raises(IndexError):
            r.read_raw(r.n_times)
        with pytest.raises(IndexError):
            r.read_raw(-1)


def test_streaming_matches_bulk(small_dataset):
    with wxd.DatasetReader(small_dataset) as r:
        bulk = r.read_all()
        for t in (0, r.n_times - 1):
            assert np.array_equal(r.read_raw(t), bulk.data[t])


def test_timestamps_hourly(small_dataset):
    with wxd.DatasetReader(small_dataset) as r:
        ts = r.timestamps
        assert len(ts) == r.n_times
        assert (ts[1] - ts[0]).total_seconds() == 3600


def test_mask_round_trip(small_dataset):
    with wxd.DatasetReader(small_dataset) as r:
        assert r.mask is not None
        assert set(np.unique(r.mask.mask)) <= {0, 1}
