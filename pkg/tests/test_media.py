import numpy as np
import pytest

from errors import ConfigurationError, DataError
from media import (CoefficientField, SourceConfig, case_field, load_field, load_geometry, save_field,
                   synth_channels)


def test_field_rejects_nonpositive():
    values = np.ones((4, 4))
    values[1, 2] = 0.0
    with pytest.raises(DataError) as exc:
        CoefficientField(values)
    assert exc.value.cell == (1, 2)


def test_field_properties():
    values = np.ones((4, 4))
    values[2, :] = 50.0
    kappa = CoefficientField(values)
    assert kappa.contrast == pytest.approx(50.0)
    low, high = kappa.split(1.0)
    assert low.sum() == 12 and high.sum() == 4
    assert np.all(low ^ high)
    assert kappa.scaled(2.0).contrast == pytest.approx(50.0)
    assert not kappa.values.flags.writeable


def test_check_mesh(mesh):
    with pytest.raises(DataError):
        CoefficientField(np.ones((4, 4))).check_mesh(mesh)
    CoefficientField(np.ones((8, 8))).check_mesh(mesh)


def test_load_field(tmp_path):
    path = tmp_path / "kappa.csv"
    path.write_text("# two rows\n1,2,3\n4,5,6\n")
    kappa = load_field(path, expected_shape=(2, 3))
    np.testing.assert_array_equal(kappa.values, [[1, 2, 3], [4, 5, 6]])
    with pytest.raises(DataError):
        load_field(path, expected_shape=(3, 2))
    with pytest.raises(DataError):
        load_field(tmp_path / "missing.csv")
    ragged = tmp_path / "ragged.csv"
    ragged.write_text("1,2\n3\n")
    with pytest.raises(DataError):
        load_field(ragged)


def test_save_keeps_full_precision(tmp_path):
    values = np.full((2, 2), 1.0 / 3.0)
    save_field(CoefficientField(values), tmp_path / "k.csv")
    assert np.array_equal(load_field(tmp_path / "k.csv").values, values)


def test_synth_channels_cell_center_rule():
    entries = [{"kind": "hstrip", "y0": 0.25, "y1": 0.375},
               {"kind": "block", "x0": 0.0, "x1": 0.25, "y0": 0.25, "y1": 0.375, "value": 7.0}]
    kappa = synth_channels(entries, 1.0, 100.0, 8)
    v = kappa.values
    np.testing.assert_array_equal(v[2, 2:], 100.0)
    np.testing.assert_array_equal(v[2, :2], 7.0)
    assert np.all(np.delete(v, 2, axis=0) == 1.0)


def test_synth_rejects_bad_entries():
    with pytest.raises(DataError):
        synth_channels([{"kind": "block", "x0": 0.5, "x1": 1.5}], 1.0, 10.0, 8)
    with pytest.raises(DataError):
        synth_channels([{"kind": "block", "x0": 0.5, "x1": 0.2}], 1.0, 10.0, 8)


@pytest.mark.parametrize("case", ["case1", "case2"])
def test_shipped_cases(case):
    kappa = case_field(case, 100)
    assert kappa.shape == (100, 100)
    assert kappa.contrast == pytest.approx(1e4)
    low = case_field(case, 100, contrast=10.0)
    assert low.contrast == pytest.approx(10.0)


def test_unknown_case():
    with pytest.raises(ConfigurationError):
        case_field("case9", 100)


def test_load_geometry_errors(tmp_path):
    with pytest.raises(DataError):
        load_geometry(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text('{"entries": [{"kind": "circle"}]}')
    with pytest.raises(DataError):
        load_geometry(bad)


def test_source_profile_and_load(mesh):
    src = SourceConfig(f0=0.5)
    profile = src.profile(mesh)
    assert profile.sum() == 4
    grid = profile.reshape(8, 8)
    assert grid[3:5, 3:5].sum() == 4
    load = src.spatial_load(mesh)
    assert np.all(load <= 0)
    assert load.sum() == pytest.approx((2 - 4) / (4 * mesh.h ** 2) * 4 * mesh.h ** 2)
    assert src.envelope(4.0) == pytest.approx(1.0)


def test_source_f0_one_needs_amplitude(mesh):
    assert not np.any(SourceConfig(f0=1.0).spatial_load(mesh))
    assert np.any(SourceConfig(f0=1.0, amplitude=-2.0).spatial_load(mesh))


def test_source_validation():
    with pytest.raises(ConfigurationError):
        SourceConfig(f0=0.0)
    with pytest.raises(ConfigurationError):
        SourceConfig(width=0)
