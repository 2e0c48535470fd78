import cv2
import numpy as np
import pytest

from config import Scheme
from diagnostics import (ErrorSeries, Snapshot, compare, continuous_energy, export_csv, export_pgm, nodal_grid,
                         to_gray)
from errors import ArgumentError, DataError
from integrators import EnergyTrace, weighted_energy


def test_compare_identical_and_offset():
    M = np.eye(3)
    A = 2.0 * np.eye(3)
    times = np.array([0.0, 0.1])
    ref = np.array([[1.0, 0.0, 0.0], [0.0, 2.0, 0.0]])
    series = compare(times, ref, times, ref, M, A)
    np.testing.assert_allclose(series.l2, 0.0)
    shifted = compare(times, ref * 1.1, times, ref, M, A)
    np.testing.assert_allclose(shifted.l2, 0.1)
    np.testing.assert_allclose(shifted.energy, 0.1)


def test_compare_uses_absolute_norm_for_zero_reference():
    series = compare([0.0], np.array([[3.0, 4.0]]), [0.0], np.zeros((1, 2)), np.eye(2), np.eye(2))
    assert series.l2[0] == pytest.approx(5.0)


def test_compare_matches_subset_of_reference_times():
    ref_times = np.arange(11) * 0.01
    ref = np.outer(ref_times, [1.0, 1.0])
    series = compare([0.02, 0.1], ref[[2, 10]], ref_times, ref, np.eye(2), np.eye(2))
    np.testing.assert_allclose(series.l2, 0.0)
    with pytest.raises(ArgumentError):
        compare([0.025], ref[[2]], ref_times, ref, np.eye(2), np.eye(2))
    with pytest.raises(ArgumentError):
        compare([0.02, 0.03], ref[[2]], ref_times, ref, np.eye(2), np.eye(2))


def test_window_and_final():
    s = ErrorSeries(np.array([0.0, 0.2, 0.4, 0.6]), np.array([1.0, 2.0, 3.0, 4.0]), np.zeros(4))
    w = s.window(0.2, 0.6)
    assert len(w) == 3
    assert w.final() == (4.0, 0.0)
    assert np.isnan(ErrorSeries(np.zeros(0), np.zeros(0), np.zeros(0)).final()[0])
    with pytest.raises(ArgumentError):
        s.window(0.5, 0.1)


def test_continuous_energy_static_state():
    u = np.array([1.0, 2.0])
    A = np.diag([1.0, 3.0])
    e = continuous_energy(np.array([0.0, 0.1, 0.2]), np.tile(u, (3, 1)), np.eye(2), A)
    np.testing.assert_allclose(e, u @ A @ u)
    assert np.isnan(continuous_energy(np.array([0.0]), u[None, :], np.eye(2), A)).all()


def test_continuous_energy_matches_discrete_scale():
    # u(t) = cos(t) e on M = A = I keeps ||u_t||^2 + ||u||^2 = 1
    tau = 1e-3
    times = np.arange(0, 401) * tau
    states = np.outer(np.cos(times), [1.0, 0.0])
    e = continuous_energy(times, states, np.eye(2), np.eye(2))
    np.testing.assert_allclose(e[1:-1], 1.0, atol=1e-5)
    discrete = weighted_energy(np.eye(2), np.eye(2), states[199], states[200], tau, 0.25)
    assert discrete == pytest.approx(e[200], rel=1e-5)


def test_nodal_grid(mesh):
    grid = nodal_grid(mesh, np.ones(mesh.n_dofs))
    assert grid.shape == (9, 9)
    assert grid[0].sum() == 0 and grid[:, -1].sum() == 0
    assert grid[1:-1, 1:-1].sum() == mesh.n_dofs
    with pytest.raises(DataError):
        nodal_grid(mesh, np.ones(3))


def test_export_csv_headers(tmp_path):
    series = ErrorSeries(np.array([0.0, 0.3]), np.array([0.1, 0.2]), np.array([0.3, 0.4]))
    path = export_csv(series, tmp_path / "errors.csv", window=(0.2, 0.6))
    lines = path.read_text().splitlines()
    assert lines[0] == "time,l2_error,energy_error"
    assert len(lines) == 2
    assert float(lines[1].split(",")[1]) == 0.2

    trace = EnergyTrace(Scheme.SPLIT_OMEGA1, np.array([1.0, 1.0 / 3.0]))
    lines = export_csv(trace, tmp_path / "energy.csv").read_text().splitlines()
    assert lines[0] == "step,energy"
    assert lines[2].startswith("2,")
    assert float(lines[2].split(",")[1]) == 1.0 / 3.0

    snap = Snapshot(0.3, np.arange(4.0).reshape(2, 2))
    lines = export_csv(snap, tmp_path / "snap.csv").read_text().splitlines()
    assert lines[0] == "# time=0.3"
    with pytest.raises(ArgumentError):
        export_csv(object(), tmp_path / "x.csv")


def test_to_gray():
    np.testing.assert_array_equal(to_gray(np.zeros((2, 2))), 128)
    g = to_gray(np.array([[-1.0, 1.0], [0.0, 0.0]]))
    # flipped vertically: the first grid row ends up at the bottom
    np.testing.assert_array_equal(g[1], [0, 255])


def test_export_pgm(tmp_path):
    snap = Snapshot(0.6, np.outer(np.linspace(-1, 1, 9), np.ones(9)))
    path = export_pgm(snap, tmp_path / "snap.pgm", heatmap=True)
    img = cv2.imread(str(path), cv2.IMREAD_GRAYSCALE)
    assert img.shape == (9, 9)
    color = cv2.imread(str(path.with_suffix(".png")))
    assert color.shape == (9, 9, 3)
