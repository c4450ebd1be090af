import numpy as np
import pytest

from wxembed.catalog import (CatalogEntry, CatalogError, GridSpec, LandSeaMask,
                             VariableCatalog, make_default_catalog,
                             make_level_catalog, make_surface_catalog)


def test_default_catalog_cardinalities():
    cat = make_default_catalog()
    assert len(cat) == 56
    assert len(cat.prognostic_indices()) == 54
    assert len(cat.diagnostic_indices()) == 2


def test_surface_block_order():
    cat = make_default_catalog()
    assert cat.names[:9] == ["u10", "v10", "t2m", "d2m", "msl", "sp", "u100", "v100", "tcwv"]


def test_pressure_block_order():
    cat = make_default_catalog()
    # level-major: 1000 hPa first, 50 hPa last, t,u,v,z,r within each level
    assert cat.names[9:14] == ["t1000", "u1000", "v1000", "z1000", "r1000"]
    assert cat.names[49:54] == ["t50", "u50", "v50", "z50", "r50"]
    assert len([n for n in cat.names if n.endswith("850")]) == 5


def test_diagnostic_entries():
    cat = make_default_catalog()
    tcc = cat.entry("tcc")
    assert tcc.data_range == (0.0, 1.0)
    assert tcc.activation == "sigmoid"
    assert tcc.mask == "none"
    stl1 = cat.entry("stl1")
    assert stl1.data_range == (220.0, 290.0)
    assert stl1.activation == "none"
    assert stl1.mask == "land-sea"


def test_every_diagnostic_has_range():
    with pytest.raises(CatalogError):
        CatalogEntry(name="x", level="surface", role="diagnostic", data_range=None)


def test_duplicate_names_rejected():
    e = CatalogEntry(name="a", level="surface", role="prognostic")
    with pytest.raises(CatalogError):
        VariableCatalog([e, e])


def test_unknown_variable_lookup():
    cat = make_surface_catalog()
    with pytest.raises(CatalogError):
        cat.index("nope")


def test_catalog_json_round_trip():
    cat = make_default_catalog()
    again = VariableCatalog.from_json_obj(cat.to_json_obj())
    assert again == cat


def test_level_catalog():
    cat = make_level_catalog([850])
    assert len(cat) == 16
    assert "r850" in cat.names and "tcc" in cat.names
    with pytest.raises(CatalogError):
        make_level_catalog([123])


def test_grid_spec_bounds():
    GridSpec(8, 8)
    with pytest.raises(CatalogError):
        GridSpec(7, 16)
    with pytest.raises(CatalogError):
        GridSpec(16, 4)


def test_grid_hint():
    GridSpec(32, 64, patch_divisible_hint=8)
    with pytest.raises(CatalogError):
        GridSpec(30, 64, patch_divisible_hint=8)


def test_mask_validation():
    m = LandSeaMask(np.array([[0, 1], [1, 0]]))
    assert m.n_land == 2 and m.n_sea == 2
    with pytest.raises(CatalogError):
        LandSeaMask(np.array([[0, 2]]))
