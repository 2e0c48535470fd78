#!/usr/bin/env python3
"""Two-level structured mesh on the unit square and its local regions."""

import numpy as np
from enum import Enum
from dataclasses import dataclass, field
from typing import Tuple

from errors import ConfigurationError


class RegionKind(Enum):
    ELEMENT = "coarse_element"
    NEIGHBORHOOD = "neighborhood"
    OVERSAMPLED = "oversampled"


@dataclass(frozen=True)
class TwoLevelMesh:
    """Uniform Q1 fine grid with an aligned coarse grid.

    Nodes are numbered row-major, node (i, j) -> j * (nx_fine + 1) + i.
    Degrees of freedom are the interior nodes (homogeneous Dirichlet on the
    whole boundary), numbered row-major as well.
    """

    nx_fine: int
    ny_fine: int
    nx_coarse: int
    ny_coarse: int

    def __post_init__(self):
        for name in ("nx_fine", "ny_fine"):
            if getattr(self, name) < 2:
                raise ConfigurationError(f"{name} must be >= 2", fields=[name])
        for name in ("nx_coarse", "ny_coarse"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1", fields=[name])
        if self.nx_fine % self.nx_coarse or self.ny_fine % self.ny_coarse:
            raise ConfigurationError(
                f"fine grid {self.nx_fine}x{self.ny_fine} is not divisible by coarse grid "
                f"{self.nx_coarse}x{self.ny_coarse}", fields=["nx_fine", "nx_coarse"])

    # -- sizes -------------------------------------------------------------
    @property
    def h(self) -> float:
        return 1.0 / self.nx_fine

    @property
    def hy(self) -> float:
        return 1.0 / self.ny_fine

    @property
    def H(self) -> float:
        return 1.0 / self.nx_coarse

    @property
    def cells_per_coarse(self) -> Tuple[int, int]:
        return self.nx_fine // self.nx_coarse, self.ny_fine // self.ny_coarse

    @property
    def n_nodes(self) -> int:
        return (self.nx_fine + 1) * (self.ny_fine + 1)

    @property
    def n_cells(self) -> int:
        return self.nx_fine * self.ny_fine

    @property
    def n_dofs(self) -> int:
        return (self.nx_fine - 1) * (self.ny_fine - 1)

    @property
    def n_elements(self) -> int:
        return self.nx_coarse * self.ny_coarse

    @property
    def n_coarse_nodes(self) -> int:
        return (self.nx_coarse + 1) * (self.ny_coarse + 1)

    # -- index maps --------------------------------------------------------
    def node_index(self, i, j):
        return np.asarray(j) * (self.nx_fine + 1) + np.asarray(i)

    def node_ij(self, node):
        node = np.asarray(node)
        return node % (self.nx_fine + 1), node // (self.nx_fine + 1)

    def node_coords(self) -> np.ndarray:
        i, j = self.node_ij(np.arange(self.n_nodes))
        return np.column_stack([i * self.h, j * self.hy])

    def dof_of_node(self) -> np.ndarray:
        """Array over all nodes: dof id, or -1 for boundary nodes."""
        i, j = self.node_ij(np.arange(self.n_nodes))
        interior = (i > 0) & (i < self.nx_fine) & (j > 0) & (j < self.ny_fine)
        out = np.full(self.n_nodes, -1, dtype=np.int64)
        out[interior] = (j[interior] - 1) * (self.nx_fine - 1) + (i[interior] - 1)
        return out

    def node_of_dof(self) -> np.ndarray:
        d = np.arange(self.n_dofs)
        i = d % (self.nx_fine - 1) + 1
        j = d // (self.nx_fine - 1) + 1
        return self.node_index(i, j)

    def cell_nodes(self) -> np.ndarray:
        """(n_cells, 4) connectivity, counterclockwise from the lower-left node."""
        ci, cj = np.meshgrid(np.arange(self.nx_fine), np.arange(self.ny_fine))
        ci, cj = ci.ravel(), cj.ravel()
        n0 = self.node_index(ci, cj)
        return np.column_stack([n0, n0 + 1, n0 + self.nx_fine + 2, n0 + self.nx_fine + 1])

    def cell_centers(self) -> np.ndarray:
        ci, cj = np.meshgrid(np.arange(self.nx_fine), np.arange(self.ny_fine))
        return np.column_stack([(ci.ravel() + 0.5) * self.h, (cj.ravel() + 0.5) * self.hy])

    def element_of_cell(self) -> np.ndarray:
        nx, ny = self.cells_per_coarse
        ci, cj = np.meshgrid(np.arange(self.nx_fine), np.arange(self.ny_fine))
        return ((cj // ny) * self.nx_coarse + ci // nx).ravel()

    # -- regions -----------------------------------------------------------
    def region(self, cx0: int, cx1: int, cy0: int, cy1: int,
               kind: RegionKind = RegionKind.OVERSAMPLED, index: int = -1) -> "LocalRegion":
        """Rectangle of coarse cells [cx0, cx1) x [cy0, cy1)."""
        cx0, cy0 = max(cx0, 0), max(cy0, 0)
        cx1, cy1 = min(cx1, self.nx_coarse), min(cy1, self.ny_coarse)
        if cx0 >= cx1 or cy0 >= cy1:
            raise ConfigurationError(f"empty region [{cx0},{cx1})x[{cy0},{cy1})")
        return LocalRegion.build(self, kind, index, cx0, cx1, cy0, cy1)

    def coarse_element(self, e: int) -> "LocalRegion":
        cx, cy = e % self.nx_coarse, e // self.nx_coarse
        return self.region(cx, cx + 1, cy, cy + 1, RegionKind.ELEMENT, e)

    def neighborhood(self, coarse_node: int) -> "LocalRegion":
        """omega_i: union of the coarse elements sharing coarse node i."""
        I, J = coarse_node % (self.nx_coarse + 1), coarse_node // (self.nx_coarse + 1)
        return self.region(I - 1, I + 1, J - 1, J + 1, RegionKind.NEIGHBORHOOD, coarse_node)


@dataclass(frozen=True)
class LocalRegion:
    """A rectangle of coarse cells with its fine-grid index maps.

    `nodes` lists every node of the closed rectangle (local -> global node);
    `free_dofs` lists the global dofs strictly inside it, i.e. the unknowns of
    a local problem with zero trace on the region boundary.
    """

    kind: RegionKind
    index: int
    cx0: int
    cx1: int
    cy0: int
    cy1: int
    nodes: np.ndarray = field(repr=False, compare=False)
    free_dofs: np.ndarray = field(repr=False, compare=False)
    cells: np.ndarray = field(repr=False, compare=False)
    elements: Tuple[int, ...] = field(repr=False, compare=False)
    mesh: TwoLevelMesh = field(repr=False, compare=False)

    @classmethod
    def build(cls, mesh: TwoLevelMesh, kind: RegionKind, index: int,
              cx0: int, cx1: int, cy0: int, cy1: int) -> "LocalRegion":
        px, py = mesh.cells_per_coarse
        x0, x1, y0, y1 = cx0 * px, cx1 * px, cy0 * py, cy1 * py
        ii, jj = np.meshgrid(np.arange(x0, x1 + 1), np.arange(y0, y1 + 1))
        nodes = mesh.node_index(ii.ravel(), jj.ravel())

        dof_map = mesh.dof_of_node()
        si, sj = np.meshgrid(np.arange(x0 + 1, x1), np.arange(y0 + 1, y1))
        inner = mesh.node_index(si.ravel(), sj.ravel())
        free = dof_map[inner] if inner.size else np.zeros(0, dtype=np.int64)

        ci, cj = np.meshgrid(np.arange(x0, x1), np.arange(y0, y1))
        cells = (cj * mesh.nx_fine + ci).ravel()

        ex, ey = np.meshgrid(np.arange(cx0, cx1), np.arange(cy0, cy1))
        elements = tuple(int(e) for e in (ey * mesh.nx_coarse + ex).ravel())
        return cls(kind, index, cx0, cx1, cy0, cy1, nodes, free.astype(np.int64),
                   cells, elements, mesh)

    @property
    def shape(self) -> Tuple[int, int]:
        """Coarse-cell extent (nx, ny)."""
        return self.cx1 - self.cx0, self.cy1 - self.cy0

    def contains(self, other: "LocalRegion") -> bool:
        return (self.cx0 <= other.cx0 and other.cx1 <= self.cx1
                and self.cy0 <= other.cy0 and other.cy1 <= self.cy1)

    def to_local(self, global_nodes) -> np.ndarray:
        """Global node ids -> positions in `nodes` (-1 when outside)."""
        lookup = {int(g): k for k, g in enumerate(self.nodes)}
        return np.array([lookup.get(int(g), -1) for g in np.atleast_1d(global_nodes)], dtype=np.int64)

    def to_global(self, local_ids) -> np.ndarray:
        return self.nodes[np.asarray(local_ids, dtype=np.int64)]

    def node_dofs(self) -> np.ndarray:
        """Dof id of every node in `nodes` (-1 on the domain boundary)."""
        return self.mesh.dof_of_node()[self.nodes]


def build_mesh(nx_fine: int, nx_coarse: int, ny_fine: int = None, ny_coarse: int = None) -> TwoLevelMesh:
    return TwoLevelMesh(nx_fine, ny_fine or nx_fine, nx_coarse, ny_coarse or nx_coarse)


def oversample(region: LocalRegion, layers: int) -> LocalRegion:
    """K_i^+: grow a region by `layers` coarse cells per side, clipped to the domain."""
    if layers < 0:
        raise ConfigurationError(f"layers must be >= 0, got {layers}", fields=["layers"])
    if layers == 0:
        return region
    return region.mesh.region(region.cx0 - layers, region.cx1 + layers,
                              region.cy0 - layers, region.cy1 + layers,
                              RegionKind.OVERSAMPLED, region.index)
