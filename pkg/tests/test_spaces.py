import logging
import numpy as np
import pytest
import scipy.linalg as la

from assembly import NATURAL, assemble_mass, assemble_stiffness
from config import Provenance, SpaceSettings, V2Choice, WeightKind
from errors import ArgumentError
from grid import oversample
from spaces import (build_aux_space, build_cem_basis, build_lumped_pair, build_space_pair, build_v2_choice1,
                    build_v2_choice2, export_basis_csv, orthogonalize, project)
from tests.helpers import channel_field


@pytest.fixture
def operators(mesh, kappa):
    return assemble_stiffness(mesh, kappa), assemble_mass(mesh)


@pytest.fixture
def aux(mesh, kappa):
    return build_aux_space(mesh, kappa, 3)


def test_aux_space_is_s_orthonormal(aux):
    assert aux.counts == [3, 3, 3, 3]
    assert aux.dim == 12
    np.testing.assert_array_equal(aux.offsets, [0, 3, 6, 9, 12])
    for ea in aux.elements:
        G = ea.vectors.T @ (ea.s_local @ ea.vectors)
        np.testing.assert_allclose(G, np.eye(3), atol=1e-9)
        # constants are in the kernel of the natural-boundary stiffness
        assert abs(ea.values[0]) < 1e-8
        assert np.all(np.diff(ea.values) >= -1e-12)


def test_aux_partition_of_unity_weight(mesh, kappa):
    aux = build_aux_space(mesh, kappa, 2, WeightKind.PARTITION_OF_UNITY)
    assert aux.dim == 8


def test_aux_count_beyond_local_dimension(mesh, kappa):
    with pytest.raises(ArgumentError):
        build_aux_space(mesh, kappa, 30)


def test_projection_contracts(mesh, aux, rng):
    v = rng.standard_normal(mesh.n_dofs)
    p = project(aux, v)
    assert p.coeffs.shape == (12,)
    assert p.s_norm() <= aux.s_norm(v) + 1e-10
    # projecting twice changes nothing
    np.testing.assert_allclose(aux.coefficients(p), p.coeffs, atol=1e-10)


def test_cem_basis_interpolates_aux(mesh, kappa, aux, operators):
    A, _ = operators
    basis = build_cem_basis(mesh, kappa, aux, layers=2, A=A)
    assert basis.provenance == Provenance.CEM
    assert basis.dim == 12
    C = np.column_stack([aux.coefficients(basis.columns[:, j].toarray().ravel()) for j in range(basis.dim)])
    np.testing.assert_allclose(C, np.eye(12), atol=1e-7)


def test_cem_basis_is_local(mesh16):
    kappa = channel_field(mesh16).ravel()
    aux = build_aux_space(mesh16, kappa, 2)
    basis = build_cem_basis(mesh16, kappa, aux, layers=1)
    region = mesh16.coarse_element(0)
    support = set(oversample(region, 1).free_dofs.tolist())
    for j in range(aux.counts[0]):
        rows = basis.columns[:, j].nonzero()[0]
        assert set(rows.tolist()) <= support


def test_v2_choice2_vanishes_on_aux(mesh, kappa, aux, operators):
    A, _ = operators
    basis = build_v2_choice2(mesh, kappa, aux, J=2, layers=2, A=A)
    assert basis.provenance == Provenance.V2_CHOICE2
    assert all(c >= 2 for c in basis.counts)
    assert basis.dim == sum(basis.counts)
    for j in range(basis.dim):
        col = basis.columns[:, j].toarray().ravel()
        scale = max(aux.s_norm(col), 1.0)
        np.testing.assert_allclose(aux.coefficients(col), 0.0, atol=1e-7 * scale)


def test_v2_choice2_modes_use_the_closed_element(mesh, kappa, aux, operators):
    A, _ = operators
    basis = build_v2_choice2(mesh, kappa, aux, J=2, layers=1, A=A)
    md = basis.modes[0]
    region = md.region
    assert md.vectors.shape == (region.nodes.size, md.count)
    np.testing.assert_allclose(md.vectors.T @ (md.mass_local @ md.vectors), np.eye(md.count), atol=1e-9)
    np.testing.assert_allclose(aux.elements[0].functionals() @ md.vectors, 0.0, atol=1e-8)
    # element 0 touches the rest of the mesh along i = 4 and j = 4
    i, j = mesh.node_ij(region.nodes)
    inner_edge = ((i == 4) | (j == 4)) & (i > 0) & (j > 0)
    assert np.max(np.abs(md.vectors[inner_edge])) > 1e-3 * np.max(np.abs(md.vectors))

    # (zeta_j^i, xi_k^l) = delta over all elements
    n = mesh.n_dofs
    R2 = np.vstack([m.scatter(np.arange(n), n) for m in basis.modes])
    np.testing.assert_allclose(R2 @ basis.columns.toarray(), np.eye(basis.dim), atol=1e-7)


def test_v2_choice1_vanishes_on_aux(mesh, kappa, aux, operators):
    A, M = operators
    basis = build_v2_choice1(mesh, kappa, aux, J=2, A=A, M=M)
    assert basis.provenance == Provenance.V2_CHOICE1
    assert basis.dim == sum(basis.counts)
    assert basis.dim >= 2
    for j in range(basis.dim):
        col = basis.columns[:, j].toarray().ravel()
        scale = max(aux.s_norm(col), 1.0)
        np.testing.assert_allclose(aux.coefficients(col), 0.0, atol=1e-7 * scale)


def test_zero_v2_count_gives_empty_block(mesh, kappa, aux):
    assert build_v2_choice1(mesh, kappa, aux, J=0).dim == 0
    assert build_v2_choice2(mesh, kappa, aux, J=0, layers=1).dim == 0
    with pytest.raises(ArgumentError):
        build_v2_choice2(mesh, kappa, aux, J=-1, layers=1)


def test_space_pair_and_orthogonalization(mesh, kappa, operators):
    A, M = operators
    settings = SpaceSettings(aux_per_element=3, v2_choice=V2Choice.CHOICE2, v2_count=2, layers=2)
    pair = build_space_pair(mesh, kappa, settings, A, M)
    assert pair.n1 == 12
    assert pair.provenance == (Provenance.CEM, Provenance.V2_CHOICE2)
    assert pair.prolongation().shape == (mesh.n_dofs, pair.n1 + pair.n2)
    assert np.isfinite(pair.gram_condition(M))
    ortho = orthogonalize(pair, M)
    assert ortho.orthogonalized
    assert ortho.n2 == pair.n2
    assert ortho.orthogonality_defect(M) < 1e-10


def test_space_pair_orthogonalize_setting(mesh, kappa, operators):
    A, M = operators
    settings = SpaceSettings(aux_per_element=2, v2_choice=V2Choice.CHOICE1, v2_count=1, layers=1,
                             orthogonalize=True)
    pair = build_space_pair(mesh, kappa, settings, A, M)
    assert pair.orthogonalized
    assert pair.orthogonality_defect(M) < 1e-10


def test_lumped_pair_has_identity_mass(mesh, kappa, operators):
    A, _ = operators
    pair = build_lumped_pair(mesh, kappa, threshold=1.0, J=2, layers=2, A=A)
    n = pair.n1 + pair.n2
    assert pair.mass_surrogate.shape == (n, n)
    np.testing.assert_allclose(pair.mass_surrogate, np.eye(n), atol=1e-7)
    assert pair.provenance == (Provenance.LUMPED_V1, Provenance.LUMPED_V2)
    md = pair.basis2.modes[0]
    assert md.vectors.shape[0] == md.region.nodes.size and md.count >= 2
    np.testing.assert_allclose(md.vectors.T @ (md.mass_local @ md.vectors), np.eye(md.count), atol=1e-9)


def test_lumped_pair_drops_empty_indicators(mesh, operators):
    A, _ = operators
    kappa = np.ones(mesh.n_cells)
    pair = build_lumped_pair(mesh, kappa, threshold=1.0, J=1, layers=1, A=A)
    assert pair.basis1.counts == [1, 1, 1, 1]
    assert pair.n1 == 4


def test_export_basis_csv(mesh, kappa, aux, tmp_path):
    basis = build_cem_basis(mesh, kappa, aux, layers=0)
    path = tmp_path / "basis.csv"
    export_basis_csv(basis, path)
    data = np.loadtxt(path, delimiter=",")
    assert data.shape == (mesh.n_dofs, basis.dim)


def test_local_solves_report_progress_at_debug(mesh, kappa, caplog):
    with caplog.at_level(logging.DEBUG, logger="spaces"):
        aux = build_aux_space(mesh, kappa, 2)
        build_cem_basis(mesh, kappa, aux, layers=0)
        build_v2_choice2(mesh, kappa, aux, J=1, layers=0)
    debug = [r.getMessage() for r in caplog.records if r.levelno == logging.DEBUG and r.name == "spaces"]
    assert sum("auxiliary eigenvalues" in m for m in debug) == mesh.n_elements
    assert sum("CEM solve" in m for m in debug) == mesh.n_elements
    assert sum("V2 mode(s)" in m for m in debug) == mesh.n_elements


def rows_on(mesh, F, nodes, dofs):
    """Rows acting on values at `dofs`, built node by node from rows over `nodes`."""
    node_dof = mesh.dof_of_node()
    where = {int(d): p for p, d in enumerate(dofs)}
    R = np.zeros((F.shape[0], len(dofs)))
    for k, node in enumerate(nodes):
        p = where.get(int(node_dof[node]))
        if p is not None:
            R[:, p] = F[:, k]
    return R


def aux_rows(mesh, aux, dofs, elements=None):
    elements = range(mesh.n_elements) if elements is None else elements
    return np.vstack([rows_on(mesh, aux.elements[e].functionals(), aux.elements[e].region.nodes, dofs)
                      for e in elements])


def energy_gap(A, X, Y):
    """Largest ||x - y||_a / ||y||_a over matching columns."""
    D = X - Y
    return float(np.max(np.sqrt(np.einsum("ij,ij->j", D, A @ D) / np.einsum("ij,ij->j", Y, A @ Y))))


def test_v2_choice1_matches_dense_constrained_eigenproblem(mesh, kappa, aux, operators):
    A, M = operators
    basis = build_v2_choice1(mesh, kappa, aux, J=2, A=A, M=M)
    Ad, Md = A.toarray(), M.toarray()
    start = 0
    for node in range(mesh.n_coarse_nodes):
        region = mesh.neighborhood(node)
        dofs = region.free_dofs
        count = basis.counts[node]
        if dofs.size == 0:
            assert count == 0
            continue
        Z = la.null_space(aux_rows(mesh, aux, dofs, region.elements))
        A_loc, M_loc = Ad[np.ix_(dofs, dofs)], Md[np.ix_(dofs, dofs)] / mesh.H ** 2
        expected = la.eigh(Z.T @ A_loc @ Z, Z.T @ M_loc @ Z, eigvals_only=True)[:count]
        np.testing.assert_allclose(basis.eigenvalues[start:start + count], expected, rtol=1e-8)
        start += count
    assert start == basis.eigenvalues.size


def test_v2_choice2_matches_dense_constrained_problems(mesh, kappa, aux, operators):
    A, _ = operators
    # two layers cover the whole 2 x 2 coarse grid, so every local problem is the global one
    basis = build_v2_choice2(mesh, kappa, aux, J=2, layers=2, A=A)
    for md in basis.modes:
        region = mesh.coarse_element(md.element)
        A_loc = assemble_stiffness(mesh, kappa, region, NATURAL).toarray()
        M_loc = assemble_mass(mesh, None, region, NATURAL).toarray()
        Z = la.null_space(aux.elements[md.element].functionals())
        expected = la.eigh(Z.T @ A_loc @ Z, Z.T @ M_loc @ Z, eigvals_only=True)[:md.count]
        np.testing.assert_allclose(md.values, expected, rtol=1e-8, atol=1e-10)

    n = mesh.n_dofs
    dofs = np.arange(n)
    C1 = aux_rows(mesh, aux, dofs)
    C2 = np.vstack([rows_on(mesh, md.functionals(), md.region.nodes, dofs) for md in basis.modes])
    C = np.vstack([C1, C2])
    Ad = A.toarray()
    K = np.block([[Ad, C.T], [C, np.zeros((C.shape[0], C.shape[0]))]])
    rhs = np.zeros((K.shape[0], basis.dim))
    rhs[n + C1.shape[0]:] = np.eye(basis.dim)
    expected = np.linalg.solve(K, rhs)[:n]
    assert energy_gap(Ad, basis.columns.toarray(), expected) < 1e-8


def test_cem_basis_converges_to_global_minimizer(mesh16):
    kappa = channel_field(mesh16, contrast=1e4).ravel()
    aux = build_aux_space(mesh16, kappa, 3)
    A = assemble_stiffness(mesh16, kappa)
    Ad = A.toarray()
    n = mesh16.n_dofs
    C = aux_rows(mesh16, aux, np.arange(n))
    K = np.block([[Ad, C.T], [C, np.zeros((aux.dim, aux.dim))]])
    rhs = np.zeros((n + aux.dim, aux.dim))
    rhs[n:] = np.eye(aux.dim)
    glob = np.linalg.solve(K, rhs)[:n]

    gaps = [energy_gap(Ad, build_cem_basis(mesh16, kappa, aux, layers, A).columns.toarray(), glob)
            for layers in range(4)]
    # three layers reach every element of the 4 x 4 coarse grid
    assert gaps[3] < 1e-8
    assert gaps[0] > gaps[1] > gaps[2] > gaps[3]
