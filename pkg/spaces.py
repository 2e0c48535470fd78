#!/usr/bin/env python3
"""Coarse spaces: auxiliary space, CEM basis (V_H1), the two V_H2 choices and the lumped pair."""

import logging
import numpy as np
import scipy.sparse as sp
from pathlib import Path
from dataclasses import dataclass, field, replace
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence, Tuple

from config import Config, Provenance, SpaceSettings, V2Choice, WeightKind
from errors import ArgumentError, SolverError
from grid import TwoLevelMesh, LocalRegion, oversample
from assembly import NATURAL, assemble_mass, assemble_stiffness, cell_integral_rows, kappa_tilde
from linsolve import (constrained_smallest_eigenpairs, gram_condition, smallest_eigenpairs,
                      solve_saddle, SPDFactor)

logger = logging.getLogger(__name__)


def _map(fn: Callable, items: Sequence, workers: int = 1) -> list:
    """Ordered map, threaded when workers > 1 (the local solves release the GIL in LAPACK)."""
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _columns(n_rows: int, pieces: List[Tuple[np.ndarray, np.ndarray]]) -> sp.csc_matrix:
    """Stack local column blocks (dof ids, values[len(ids), k]) into one sparse matrix."""
    rows, cols, vals = [], [], []
    offset = 0
    for dofs, X in pieces:
        if X.ndim == 1:
            X = X[:, None]
        k = X.shape[1]
        rows.append(np.repeat(dofs, k))
        cols.append(np.tile(np.arange(offset, offset + k), len(dofs)))
        vals.append(X.ravel())
        offset += k
    if not pieces:
        return sp.csc_matrix((n_rows, 0))
    return sp.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(n_rows, offset))


def _positions(n_dofs: int, dofs: np.ndarray) -> np.ndarray:
    pos = np.full(n_dofs, -1, dtype=np.int64)
    pos[dofs] = np.arange(len(dofs))
    return pos


def _scatter_rows(F: np.ndarray, region: LocalRegion, pos: np.ndarray, width: int) -> np.ndarray:
    """Functionals given on region.nodes -> rows over the unknowns numbered by `pos`.

    Nodes on the domain boundary or outside the unknowns are dropped, since
    the functions the rows act on vanish there.
    """
    nd = region.node_dofs()
    cols = np.full(nd.size, -1, dtype=np.int64)
    cols[nd >= 0] = pos[nd[nd >= 0]]
    keep = cols >= 0
    R = np.zeros((F.shape[0], width))
    R[:, cols[keep]] = F[:, keep]
    return R


# ---------------------------------------------------------------------------
# Auxiliary space
# ---------------------------------------------------------------------------

@dataclass
class ElementAux:
    element: int
    region: LocalRegion = field(repr=False)
    vectors: np.ndarray = field(repr=False)  # on region.nodes, s_i-orthonormal
    values: np.ndarray
    s_local: sp.csr_matrix = field(repr=False)

    @property
    def count(self) -> int:
        return self.vectors.shape[1]

    def functionals(self) -> np.ndarray:
        """Rows F with F @ v_local = s_i(v, psi_j)."""
        return (self.s_local @ self.vectors).T


@dataclass
class AuxSpace:
    mesh: TwoLevelMesh = field(repr=False)
    weight: np.ndarray = field(repr=False)
    elements: List[ElementAux] = field(repr=False)

    @property
    def counts(self) -> List[int]:
        return [ea.count for ea in self.elements]

    @property
    def dim(self) -> int:
        return int(sum(self.counts))

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.counts)]).astype(int)

    def labels(self, elements: Optional[Sequence[int]] = None) -> List[str]:
        elements = range(len(self.elements)) if elements is None else elements
        return [f"psi[K={e},j={j}]" for e in elements for j in range(self.elements[e].count)]

    def constraint_rows(self, dofs: np.ndarray, elements: Optional[Sequence[int]] = None) -> np.ndarray:
        """Rows r with r @ v = s(v, psi) for v given on `dofs` (zero elsewhere)."""
        elements = range(len(self.elements)) if elements is None else elements
        pos = _positions(self.mesh.n_dofs, dofs)
        blocks = [_scatter_rows(self.elements[e].functionals(), self.elements[e].region, pos, len(dofs))
                  for e in elements]
        return np.vstack(blocks) if blocks else np.zeros((0, len(dofs)))

    def local_values(self, v: np.ndarray, e: int) -> np.ndarray:
        """Restriction of a dof vector to the closed element (zero on the domain boundary)."""
        nd = self.elements[e].region.node_dofs()
        out = np.zeros(nd.size)
        out[nd >= 0] = v[nd[nd >= 0]]
        return out

    def coefficients(self, v) -> np.ndarray:
        """s(v, psi_j^i) for every auxiliary function; v is a dof vector or an AuxFunction."""
        out = []
        for e, ea in enumerate(self.elements):
            loc = v.local(e) if isinstance(v, AuxFunction) else self.local_values(v, e)
            out.append(ea.functionals() @ loc)
        return np.concatenate(out) if out else np.zeros(0)

    def s_norm(self, v) -> float:
        """sqrt(sum_i s_i(v, v)), element by element."""
        total = 0.0
        for e, ea in enumerate(self.elements):
            loc = v.local(e) if isinstance(v, AuxFunction) else self.local_values(v, e)
            total += float(loc @ (ea.s_local @ loc))
        return float(np.sqrt(max(total, 0.0)))


@dataclass
class AuxFunction:
    """An element of V_aux (broken across coarse elements), stored by its coefficients."""

    aux: AuxSpace = field(repr=False)
    coeffs: np.ndarray

    def local(self, e: int) -> np.ndarray:
        o = self.aux.offsets
        return self.aux.elements[e].vectors @ self.coeffs[o[e]:o[e + 1]]

    def s_norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))


def build_aux_space(mesh: TwoLevelMesh, kappa: np.ndarray, L: int,
                    weight_kind: WeightKind = WeightKind.COARSE_SCALED, workers: int = 1) -> AuxSpace:
    """Per coarse element, the L lowest modes of a_i(psi, v) = lambda s_i(psi, v) on V(K_i)."""
    if L < 1:
        raise ArgumentError(f"auxiliary count must be >= 1, got {L}")
    weight = kappa_tilde(mesh, kappa, weight_kind)

    def one(e: int) -> ElementAux:
        region = mesh.coarse_element(e)
        if L > region.nodes.size:
            raise ArgumentError(f"element {e}: {L} auxiliary functions requested, "
                                f"local space has dimension {region.nodes.size}")
        A_loc = assemble_stiffness(mesh, kappa, region, NATURAL)
        S_loc = assemble_mass(mesh, weight, region, NATURAL)
        try:
            pairs = smallest_eigenpairs(A_loc, S_loc, L)
        except SolverError as err:
            raise SolverError(f"auxiliary eigenproblem on element {e}: {err}")
        logger.debug(f"[Spaces] Element {e}: auxiliary eigenvalues {np.array2string(pairs.values, precision=4)}")
        return ElementAux(e, region, pairs.vectors, pairs.values, S_loc)

    elements = _map(one, list(range(mesh.n_elements)), workers)
    aux = AuxSpace(mesh, weight, elements)
    logger.info(f"[Spaces] Auxiliary space: {aux.dim} functions on {mesh.n_elements} elements ({weight_kind.value})")
    return aux


def project(aux: AuxSpace, v) -> AuxFunction:
    """Pi v: the s-orthogonal projection onto V_aux."""
    return AuxFunction(aux, aux.coefficients(v))


# ---------------------------------------------------------------------------
# Bases
# ---------------------------------------------------------------------------

@dataclass
class BasisBlock:
    """Columns spanning one coarse space, in fine dof coordinates."""

    columns: sp.csc_matrix = field(repr=False)
    provenance: Provenance
    counts: List[int]  # columns per element / neighborhood
    eigenvalues: Optional[np.ndarray] = field(default=None, repr=False)
    modes: Optional[List["ElementModes"]] = field(default=None, repr=False)  # xi_j^i behind V_H2

    @property
    def dim(self) -> int:
        return self.columns.shape[1]

    @classmethod
    def empty(cls, n_rows: int, provenance: Provenance) -> "BasisBlock":
        return cls(sp.csc_matrix((n_rows, 0)), provenance, [])


def _with_own_rows(m_per_element: List[int], own_position: int, own_count: int) -> np.ndarray:
    """Right-hand side: identity columns at the rows of the owning element."""
    c = np.zeros((int(sum(m_per_element)), own_count))
    start = int(sum(m_per_element[:own_position]))
    c[start:start + own_count, :] = np.eye(own_count)
    return c


def build_cem_basis(mesh: TwoLevelMesh, kappa: np.ndarray, aux: AuxSpace, layers: int,
                    A: Optional[sp.spmatrix] = None, workers: int = 1) -> BasisBlock:
    """phi_j^i: minimize a(phi, phi) on K_i^+ subject to s(phi, nu) = s(psi_j^i, nu) for nu in V_aux(K_i^+)."""
    A = assemble_stiffness(mesh, kappa) if A is None else A.tocsr()

    def one(e: int):
        region = oversample(mesh.coarse_element(e), layers)
        dofs = region.free_dofs
        C = aux.constraint_rows(dofs, region.elements)
        c = _with_own_rows([aux.elements[l].count for l in region.elements],
                           region.elements.index(e), aux.elements[e].count)
        A_loc = A[dofs][:, dofs]
        x, _ = solve_saddle(A_loc, C, np.zeros((dofs.size, c.shape[1])), c, labels=aux.labels(region.elements))
        logger.debug(f"[Spaces] Element {e}: CEM solve on {dofs.size} dofs, {C.shape[0]} constraints")
        return dofs, x

    pieces = _map(one, list(range(mesh.n_elements)), workers)
    block = BasisBlock(_columns(mesh.n_dofs, pieces), Provenance.CEM, aux.counts)
    logger.info(f"[Spaces] CEM basis: {block.dim} columns, {layers} oversampling layer(s)")
    return block


def build_v2_choice1(mesh: TwoLevelMesh, kappa: np.ndarray, aux: AuxSpace, J: int,
                     A: Optional[sp.spmatrix] = None, M: Optional[sp.spmatrix] = None,
                     workers: int = 1) -> BasisBlock:
    """Per coarse neighborhood, the J lowest modes of a(xi, v) = (gamma / H^2)(xi, v) on V0(omega_i) within V~."""
    if J < 0:
        raise ArgumentError(f"J must be >= 0, got {J}")
    if J == 0:
        return BasisBlock.empty(mesh.n_dofs, Provenance.V2_CHOICE1)
    A = assemble_stiffness(mesh, kappa) if A is None else A.tocsr()
    M = assemble_mass(mesh) if M is None else M.tocsr()
    H2 = mesh.H ** 2
    tie = Config.solver.tie_rtol

    def one(node: int):
        region = mesh.neighborhood(node)
        dofs = region.free_dofs
        if dofs.size == 0:
            return dofs, np.zeros((0, 0)), np.zeros(0)
        C = aux.constraint_rows(dofs, region.elements)
        try:
            pairs = constrained_smallest_eigenpairs(A[dofs][:, dofs], M[dofs][:, dofs] / H2, C, J, tie_rtol=tie)
        except ArgumentError as err:
            raise ArgumentError(f"neighborhood {node}: {err}")
        logger.debug(f"[Spaces] Neighborhood {node}: {pairs.values.size} mode(s) on {dofs.size} dofs")
        return dofs, pairs.vectors / mesh.H, pairs.values

    results = _map(one, list(range(mesh.n_coarse_nodes)), workers)
    pieces = [(d, X) for d, X, _ in results if d.size]
    block = BasisBlock(_columns(mesh.n_dofs, pieces), Provenance.V2_CHOICE1,
                       [X.shape[1] if d.size else 0 for d, X, _ in results],
                       eigenvalues=np.concatenate([g for _, _, g in results]))
    logger.info(f"[Spaces] V2 (neighborhood spectral): {block.dim} columns")
    return block


@dataclass
class ElementModes:
    """xi_j^i in V(K_i): every node of the closed element, L2-orthonormal over K_i."""

    element: int
    region: LocalRegion = field(repr=False)
    vectors: np.ndarray = field(repr=False)  # on region.nodes
    values: np.ndarray
    mass_local: sp.csr_matrix = field(repr=False)

    @property
    def count(self) -> int:
        return self.vectors.shape[1]

    def functionals(self) -> np.ndarray:
        """Rows F with F @ v_local = (v, xi_j) over K_i."""
        return np.asarray(self.mass_local @ self.vectors).T

    def scatter(self, dofs: np.ndarray, n_dofs: int) -> np.ndarray:
        """(v, xi_j) as rows acting on v given on `dofs` (zero elsewhere)."""
        return _scatter_rows(self.functionals(), self.region, _positions(n_dofs, dofs), len(dofs))


def _element_modes(mesh: TwoLevelMesh, kappa: np.ndarray, rows_for: Callable, J: int, workers: int,
                   tie: float) -> List[ElementModes]:
    """Per element, J lowest modes of a_i vs (.,.) on V(K_i) with rows_for(e, region) @ xi = 0."""
    def one(e: int) -> ElementModes:
        region = mesh.coarse_element(e)
        A_loc = assemble_stiffness(mesh, kappa, region, NATURAL)
        M_loc = assemble_mass(mesh, None, region, NATURAL)
        if J == 0:
            return ElementModes(e, region, np.zeros((region.nodes.size, 0)), np.zeros(0), M_loc)
        try:
            pairs = constrained_smallest_eigenpairs(A_loc, M_loc, rows_for(e, region), J, tie_rtol=tie)
        except ArgumentError as err:
            raise ArgumentError(f"element {e}: {err}")
        logger.debug(f"[Spaces] Element {e}: {pairs.values.size} V2 mode(s), lambda <= {pairs.values[-1]:.4e}")
        return ElementModes(e, region, pairs.vectors, pairs.values, M_loc)

    return _map(one, list(range(mesh.n_elements)), workers)


def build_v2_choice2(mesh: TwoLevelMesh, kappa: np.ndarray, aux: AuxSpace, J: int, layers: int,
                     A: Optional[sp.spmatrix] = None, workers: int = 1) -> BasisBlock:
    """zeta_j^i: minimize a(zeta, zeta) on K_i^+ with s(zeta, V_aux) = 0 and (zeta, nu) = (xi_j^i, nu) on V_aux,2.

    xi_j^i are the lowest a_i-modes on the closed element K_i (natural boundary)
    that are s_i-orthogonal to the auxiliary functions of K_i.
    """
    if J < 0:
        raise ArgumentError(f"J must be >= 0, got {J}")
    if J == 0:
        return BasisBlock.empty(mesh.n_dofs, Provenance.V2_CHOICE2)
    A = assemble_stiffness(mesh, kappa) if A is None else A.tocsr()

    modes = _element_modes(mesh, kappa, lambda e, region: aux.elements[e].functionals(), J, workers,
                           Config.solver.tie_rtol)
    xi_counts = [md.count for md in modes]

    def one(e: int):
        region = oversample(mesh.coarse_element(e), layers)
        dofs = region.free_dofs
        C1 = aux.constraint_rows(dofs, region.elements)
        C2 = np.vstack([modes[l].scatter(dofs, mesh.n_dofs) for l in region.elements])
        c2 = _with_own_rows([xi_counts[l] for l in region.elements], region.elements.index(e), xi_counts[e])
        c = np.vstack([np.zeros((C1.shape[0], xi_counts[e])), c2])
        labels = aux.labels(region.elements) + [f"xi[K={l},j={j}]" for l in region.elements
                                                 for j in range(xi_counts[l])]
        x, _ = solve_saddle(A[dofs][:, dofs], np.vstack([C1, C2]), np.zeros((dofs.size, xi_counts[e])), c,
                            labels=labels)
        return dofs, x

    pieces = _map(one, list(range(mesh.n_elements)), workers)
    block = BasisBlock(_columns(mesh.n_dofs, pieces), Provenance.V2_CHOICE2, xi_counts,
                       eigenvalues=np.concatenate([md.values for md in modes]), modes=modes)
    logger.info(f"[Spaces] V2 (element spectral, oversampled): {block.dim} columns, {layers} layer(s)")
    return block


# ---------------------------------------------------------------------------
# Pairs
# ---------------------------------------------------------------------------

@dataclass
class SpacePair:
    basis1: BasisBlock
    basis2: BasisBlock
    layers: int = 0
    mass_surrogate: Optional[np.ndarray] = field(default=None, repr=False)
    orthogonalized: bool = False
    aux: Optional[AuxSpace] = field(default=None, repr=False)

    @property
    def n1(self) -> int:
        return self.basis1.dim

    @property
    def n2(self) -> int:
        return self.basis2.dim

    @property
    def provenance(self) -> Tuple[Provenance, Provenance]:
        return self.basis1.provenance, self.basis2.provenance

    def prolongation(self) -> sp.csc_matrix:
        """Fine dof values of [V_H1 | V_H2] coefficients."""
        return sp.hstack([self.basis1.columns, self.basis2.columns], format="csc")

    def gram(self, M) -> np.ndarray:
        P = self.prolongation()
        return np.asarray((P.T @ (M @ P)).todense())

    def gram_condition(self, M) -> float:
        return gram_condition(self.gram(M))

    def orthogonality_defect(self, M) -> float:
        """||M12|| / sqrt(||M11|| ||M22||) in the 2-norm."""
        if self.n1 == 0 or self.n2 == 0:
            return 0.0
        G = self.gram(M)
        M11, M12, M22 = G[:self.n1, :self.n1], G[:self.n1, self.n1:], G[self.n1:, self.n1:]
        return float(np.linalg.norm(M12, 2) / np.sqrt(np.linalg.norm(M11, 2) * np.linalg.norm(M22, 2)))


def orthogonalize(pair: SpacePair, M) -> SpacePair:
    """Replace basis2 by its M-orthogonal complement against basis1."""
    if pair.n1 == 0 or pair.n2 == 0:
        return replace(pair, orthogonalized=True)
    P1, P2 = pair.basis1.columns, pair.basis2.columns
    G11 = np.asarray((P1.T @ (M @ P1)).todense())
    G12 = np.asarray((P1.T @ (M @ P2)).todense())
    coeffs = SPDFactor(G11, "V_H1 Gram matrix").solve(G12)
    P2o = sp.csc_matrix(P2 - P1 @ coeffs)
    logger.info(f"[Spaces] Orthogonalized V2 against V1 ({pair.n2} columns)")
    return replace(pair, basis2=replace(pair.basis2, columns=P2o), orthogonalized=True)


def build_lumped_pair(mesh: TwoLevelMesh, kappa: np.ndarray, threshold: float, J: int, layers: int,
                      A: Optional[sp.spmatrix] = None, workers: int = 1) -> SpacePair:
    """Pair built from per-element indicators of {kappa <= threshold} / {kappa > threshold}.

    Basis functions are biorthogonal to the auxiliary functions, so the
    projected mass (pi u, pi v) is the identity in these coordinates.
    """
    if J < 0:
        raise ArgumentError(f"J must be >= 0, got {J}")
    kappa = np.asarray(kappa, dtype=float).ravel()
    A = assemble_stiffness(mesh, kappa) if A is None else A.tocsr()
    cell_area = mesh.h * mesh.hy

    # V_aux,1: L2-normalized indicators, empty parts dropped
    weights, ind_counts = [], []
    for e in range(mesh.n_elements):
        cells = mesh.coarse_element(e).cells
        kept = 0
        for label, part in (("low", kappa[cells] <= threshold), ("high", kappa[cells] > threshold)):
            if not part.any():
                logger.info(f"[Spaces] Element {e}: no {label}-coefficient cells, indicator dropped")
                continue
            w = np.zeros(mesh.n_cells)
            w[cells[part]] = 1.0 / np.sqrt(part.sum() * cell_area)
            weights.append(w)
            kept += 1
        ind_counts.append(kept)
    node_rows = cell_integral_rows(mesh, np.array(weights), nodes=np.arange(mesh.n_nodes))
    R1 = node_rows[:, mesh.node_of_dof()]
    ind_offsets = np.concatenate([[0], np.cumsum(ind_counts)]).astype(int)
    ind_local = [node_rows[ind_offsets[e]:ind_offsets[e + 1]][:, mesh.coarse_element(e).nodes]
                 for e in range(mesh.n_elements)]

    # V_aux,2: modes on V(K_i) L2-orthogonal to the indicators
    modes = _element_modes(mesh, kappa, lambda e, region: ind_local[e], J, workers, Config.solver.tie_rtol)
    xi_counts = [md.count for md in modes]
    xi_offsets = np.concatenate([[0], np.cumsum(xi_counts)]).astype(int)
    all_dofs = np.arange(mesh.n_dofs)
    R2 = np.vstack([md.scatter(all_dofs, mesh.n_dofs) for md in modes])

    def one(e: int):
        region = oversample(mesh.coarse_element(e), layers)
        dofs = region.free_dofs
        ind_rows = np.concatenate([np.arange(ind_offsets[l], ind_offsets[l + 1]) for l in region.elements])
        xi_rows = np.concatenate([np.arange(xi_offsets[l], xi_offsets[l + 1]) for l in region.elements])
        C = np.vstack([R1[ind_rows][:, dofs], R2[xi_rows][:, dofs]])
        counts = [ind_counts[l] for l in region.elements] + [xi_counts[l] for l in region.elements]
        k = region.elements.index(e)
        own = ind_counts[e] + xi_counts[e]
        c = np.hstack([_with_own_rows(counts, k, ind_counts[e]),
                       _with_own_rows(counts, len(region.elements) + k, xi_counts[e])])
        labels = ([f"indicator[K={l},part={j}]" for l in region.elements for j in range(ind_counts[l])]
                  + [f"xi[K={l},j={j}]" for l in region.elements for j in range(xi_counts[l])])
        x, _ = solve_saddle(A[dofs][:, dofs], C, np.zeros((dofs.size, own)), c, labels=labels)
        logger.debug(f"[Spaces] Element {e}: lumped basis on {dofs.size} dofs, {len(region.elements)} element(s)")
        return dofs, x[:, :ind_counts[e]], x[:, ind_counts[e]:]

    results = _map(one, list(range(mesh.n_elements)), workers)
    basis1 = BasisBlock(_columns(mesh.n_dofs, [(d, X1) for d, X1, _ in results]), Provenance.LUMPED_V1, ind_counts)
    basis2 = BasisBlock(_columns(mesh.n_dofs, [(d, X2) for d, _, X2 in results]), Provenance.LUMPED_V2, xi_counts,
                        eigenvalues=np.concatenate([md.values for md in modes]), modes=modes)

    # (pi u, pi v) with pi the L2 projection onto V_aux,1 + V_aux,2; the auxiliary
    # functions live on single closed elements, so their Gram matrix is element-block diagonal
    R = np.vstack([R1, R2])
    P = R @ sp.hstack([basis1.columns, basis2.columns], format="csc").toarray()
    n_ind = R1.shape[0]
    G_aux = np.eye(R.shape[0])
    for e, md in enumerate(modes):
        if not md.count:
            continue
        xs = slice(n_ind + xi_offsets[e], n_ind + xi_offsets[e + 1])
        ins = slice(ind_offsets[e], ind_offsets[e + 1])
        G_aux[xs, xs] = md.vectors.T @ (md.mass_local @ md.vectors)
        G_aux[ins, xs] = ind_local[e] @ md.vectors
        G_aux[xs, ins] = G_aux[ins, xs].T
    surrogate = P.T @ SPDFactor(G_aux, "auxiliary Gram matrix").solve(P)
    logger.info(f"[Spaces] Lumped pair: V1 {basis1.dim} columns, V2 {basis2.dim} columns, threshold {threshold}")
    return SpacePair(basis1, basis2, layers, mass_surrogate=surrogate)


def build_space_pair(mesh: TwoLevelMesh, kappa: np.ndarray, settings: SpaceSettings,
                     A: Optional[sp.spmatrix] = None, M: Optional[sp.spmatrix] = None,
                     workers: int = 1) -> SpacePair:
    """CEM V_H1 plus the configured V_H2 choice."""
    A = assemble_stiffness(mesh, kappa) if A is None else A
    M = assemble_mass(mesh) if M is None else M
    aux = build_aux_space(mesh, kappa, settings.aux_per_element, settings.weight, workers)
    basis1 = build_cem_basis(mesh, kappa, aux, settings.layers, A, workers)
    if settings.v2_choice == V2Choice.CHOICE1:
        basis2 = build_v2_choice1(mesh, kappa, aux, settings.v2_count, A, M, workers)
    else:
        basis2 = build_v2_choice2(mesh, kappa, aux, settings.v2_count, settings.layers, A, workers)
    pair = SpacePair(basis1, basis2, settings.layers, aux=aux)
    if settings.orthogonalize:
        pair = orthogonalize(pair, M)
    logger.info(f"[Spaces] Space pair ready: V1 {pair.n1}, V2 {pair.n2}, Gram condition {pair.gram_condition(M):.3e}")
    return pair


def export_basis_csv(block: BasisBlock, path):
    """Dense dump (fine dofs x columns) for debugging."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, block.columns.toarray(), delimiter=",", fmt=Config.CSV_FLOAT_FORMAT)
