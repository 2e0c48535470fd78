#!/usr/bin/env python3
"""Q1 finite element assembly: stiffness, (weighted) mass, loads and the source."""

import math
import numpy as np
import scipy.sparse as sp
from typing import Optional

from errors import ArgumentError, DataError
from grid import TwoLevelMesh, LocalRegion
from config import WeightKind

SparseOperator = sp.csr_matrix

DIRICHLET = "dirichlet"
NATURAL = "natural"

_GAUSS = np.array([-1.0, 1.0]) / math.sqrt(3.0) * 0.5 + 0.5  # 2-point rule on [0, 1]


def _reference_matrices(hx: float, hy: float):
    """Element stiffness and mass of a hx-by-hy Q1 cell, 2x2 Gauss."""
    # local node order: (0,0), (1,0), (1,1), (0,1)
    sx = np.array([0.0, 1.0, 1.0, 0.0])
    sy = np.array([0.0, 0.0, 1.0, 1.0])
    K = np.zeros((4, 4))
    Mloc = np.zeros((4, 4))
    w = 0.25 * hx * hy
    for gx in _GAUSS:
        for gy in _GAUSS:
            phi = (sx * gx + (1 - sx) * (1 - gx)) * (sy * gy + (1 - sy) * (1 - gy))
            dx = (2 * sx - 1) * (sy * gy + (1 - sy) * (1 - gy)) / hx
            dy = (sx * gx + (1 - sx) * (1 - gx)) * (2 * sy - 1) / hy
            K += w * (np.outer(dx, dx) + np.outer(dy, dy))
            Mloc += w * np.outer(phi, phi)
    return K, Mloc


def check_coefficient(mesh: TwoLevelMesh, kappa: np.ndarray) -> np.ndarray:
    kappa = np.asarray(kappa, dtype=float).ravel()
    if kappa.size != mesh.n_cells:
        raise DataError(f"coefficient has {kappa.size} values, mesh has {mesh.n_cells} cells")
    bad = np.flatnonzero(~np.isfinite(kappa) | (kappa <= 0))
    if bad.size:
        c = int(bad[0])
        raise DataError(f"coefficient must be positive and finite, got {kappa[c]}",
                        cell=(c // mesh.nx_fine, c % mesh.nx_fine))
    return kappa


def _index_set(mesh: TwoLevelMesh, region: Optional[LocalRegion], boundary: str) -> np.ndarray:
    """Global node ids of the unknowns, in output order."""
    if boundary == DIRICHLET:
        dofs = np.arange(mesh.n_dofs) if region is None else region.free_dofs
        return mesh.node_of_dof()[dofs]
    if boundary == NATURAL:
        return np.arange(mesh.n_nodes) if region is None else region.nodes
    raise ArgumentError(f"unknown boundary treatment '{boundary}'")


def _assemble(mesh, cell_weight, region, boundary, which) -> SparseOperator:
    K, Mloc = _reference_matrices(mesh.h, mesh.hy)
    local = K if which == "stiffness" else Mloc
    cells = np.arange(mesh.n_cells) if region is None else region.cells
    conn = mesh.cell_nodes()[cells]
    vals = cell_weight[cells][:, None, None] * local[None, :, :]
    rows = np.repeat(conn, 4, axis=1).ravel()
    cols = np.tile(conn, (1, 4)).ravel()
    full = sp.coo_matrix((vals.ravel(), (rows, cols)), shape=(mesh.n_nodes, mesh.n_nodes)).tocsr()
    idx = _index_set(mesh, region, boundary)
    return full[idx][:, idx].tocsr()


def assemble_stiffness(mesh: TwoLevelMesh, kappa: np.ndarray, region: Optional[LocalRegion] = None,
                       boundary: str = DIRICHLET) -> SparseOperator:
    """a(u, v) = int kappa grad u . grad v over `region` (whole domain if None).

    With boundary='dirichlet' the unknowns are the dofs strictly inside the
    region, otherwise every node of the closed region.
    """
    kappa = check_coefficient(mesh, kappa)
    return _assemble(mesh, kappa, region, boundary, "stiffness")


def assemble_mass(mesh: TwoLevelMesh, weight: Optional[np.ndarray] = None, region: Optional[LocalRegion] = None,
                  boundary: str = DIRICHLET) -> SparseOperator:
    """(u, v) = int weight u v; weight is per fine cell, 1 when omitted."""
    if weight is None:
        weight = np.ones(mesh.n_cells)
    else:
        weight = check_coefficient(mesh, weight)
    return _assemble(mesh, weight, region, boundary, "mass")


def kappa_tilde(mesh: TwoLevelMesh, kappa: np.ndarray, kind: WeightKind = WeightKind.COARSE_SCALED) -> np.ndarray:
    """Per-cell weight of the auxiliary inner product s_i."""
    kappa = check_coefficient(mesh, kappa)
    if kind == WeightKind.COARSE_SCALED:
        return kappa / mesh.H ** 2
    # sum_i |grad chi_i|^2 for bilinear coarse hats, averaged over each fine cell
    Hx, Hy = 1.0 / mesh.nx_coarse, 1.0 / mesh.ny_coarse
    xc = mesh.cell_centers()
    out = np.zeros(mesh.n_cells)
    for gx in _GAUSS - 0.5:
        for gy in _GAUSS - 0.5:
            xi = np.mod(xc[:, 0] + gx * mesh.h, Hx) / Hx
            eta = np.mod(xc[:, 1] + gy * mesh.hy, Hy) / Hy
            out += 0.25 * (2 * ((1 - eta) ** 2 + eta ** 2) / Hx ** 2 + 2 * ((1 - xi) ** 2 + xi ** 2) / Hy ** 2)
    return kappa * out


def cell_integral_rows(mesh: TwoLevelMesh, cell_weights: np.ndarray, dofs: Optional[np.ndarray] = None,
                       nodes: Optional[np.ndarray] = None) -> np.ndarray:
    """Row r with r . v = int w v for v a dof vector and w piecewise constant.

    `cell_weights` is (k, n_cells); the result is (k, len(dofs)). Pass `nodes`
    instead to get the columns of those global nodes (boundary nodes included).
    """
    cell_weights = np.atleast_2d(np.asarray(cell_weights, dtype=float))
    conn = mesh.cell_nodes()
    quarter = 0.25 * mesh.h * mesh.hy
    node_rows = np.zeros((cell_weights.shape[0], mesh.n_nodes))
    for k in range(4):
        np.add.at(node_rows.T, conn[:, k], quarter * cell_weights.T)
    if nodes is not None:
        return node_rows[:, np.asarray(nodes, dtype=np.int64)]
    node_ids = mesh.node_of_dof() if dofs is None else mesh.node_of_dof()[dofs]
    return node_rows[:, node_ids]


def load_vector(mesh: TwoLevelMesh, profile: np.ndarray) -> np.ndarray:
    """b_j = int f_x phi_j for a piecewise-constant spatial profile."""
    return cell_integral_rows(mesh, profile)[0]


def source_time_factor(t: float, f0: float) -> float:
    """Gaussian temporal envelope, equal to 1 at its peak t = 2 / f0."""
    return math.exp(-(math.pi * f0 * (t - 2.0 / f0)) ** 2)


def source_amplitude(f0: float, h: float, amplitude: Optional[float] = None) -> float:
    """(2 - 2/f0) / (4 h^2); `amplitude` replaces the numerator when given."""
    if f0 <= 0:
        raise ArgumentError(f"source frequency must be positive, got {f0}")
    a = (2.0 - 2.0 / f0) if amplitude is None else amplitude
    return a / (4.0 * h * h)


def assemble_source(mesh: TwoLevelMesh, profile: np.ndarray, t: float, f0: float,
                    amplitude: Optional[float] = None) -> np.ndarray:
    """Entry j = int f(t, .) phi_j with f = amplitude * envelope(t) * profile."""
    return source_amplitude(f0, mesh.h, amplitude) * source_time_factor(t, f0) * load_vector(mesh, profile)
