#!/usr/bin/env python3
"""Linear algebra kernels: SPD solves, saddle-point systems and generalized eigenproblems."""

import logging
import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

from config import Config
from errors import ArgumentError, DegeneracyError, SolverError

logger = logging.getLogger(__name__)


def _dense(X) -> np.ndarray:
    return X.toarray() if sp.issparse(X) else np.asarray(X, dtype=float)


def _norm(X) -> float:
    if sp.issparse(X):
        return float(spla.norm(X, 1)) if X.shape[0] else 0.0
    return float(np.linalg.norm(X, 1)) if np.size(X) else 0.0


def backward_error(A, x, b) -> float:
    """||Ax - b|| / (||A|| ||x|| + ||b||), column-wise maximum."""
    x2 = x.reshape(x.shape[0], -1)
    b2 = np.asarray(b).reshape(x2.shape[0], -1)
    r = A @ x2 - b2
    scale = _norm(A) * np.linalg.norm(x2, axis=0) + np.linalg.norm(b2, axis=0)
    scale[scale == 0] = 1.0
    return float(np.max(np.linalg.norm(r, axis=0) / scale)) if r.size else 0.0


class SPDFactor:
    """Factor once, solve many. Sparse operators go through SuperLU, dense ones through Cholesky."""

    def __init__(self, A, label: str = "operator"):
        self.A = A
        self.label = label
        self.shape = A.shape
        try:
            if sp.issparse(A):
                self._lu = spla.splu(sp.csc_matrix(A))
                self._chol = None
            else:
                self._chol = la.cho_factor(_dense(A), lower=True)
                self._lu = None
        except (la.LinAlgError, RuntimeError) as e:
            raise SolverError(f"factorization of {label} ({A.shape[0]}x{A.shape[1]}) failed: {e}")
        kind = "sparse LU" if self._lu is not None else "Cholesky"
        logger.debug(f"[Linsolve] Factored {label} ({A.shape[0]}x{A.shape[1]}, {kind})")

    def solve(self, b) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if b.size == 0:
            return np.zeros_like(b)
        if self._lu is not None:
            return self._lu.solve(b)
        return la.cho_solve(self._chol, b)


def solve_spd(A, b, rtol: Optional[float] = None) -> np.ndarray:
    """Solve A x = b for symmetric positive definite A (sparse or dense)."""
    rtol = Config.solver.solve_rtol if rtol is None else rtol
    factor = SPDFactor(A)
    x = factor.solve(b)
    err = backward_error(A, x, b)
    for _ in range(3):
        if err <= rtol:
            break
        x = x + factor.solve(np.asarray(b) - A @ x)
        err = backward_error(A, x, b)
    if not np.all(np.isfinite(x)) or err > rtol:
        raise SolverError("SPD solve did not reach the requested accuracy", residual=err)
    return x


def constraint_rank(C: np.ndarray, rtol: Optional[float] = None) -> Tuple[int, np.ndarray]:
    """Numerical rank of the rows of C and the pivot order of a rank-revealing QR."""
    rtol = Config.solver.rank_tol if rtol is None else rtol
    C = _dense(C)
    if C.shape[0] == 0:
        return 0, np.zeros(0, dtype=int)
    if C.shape[1] == 0:
        return 0, np.arange(C.shape[0])
    _, R, piv = la.qr(C.T, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    if d.size == 0 or d[0] == 0:
        return 0, piv
    return int(np.sum(d > rtol * d[0])), piv


def solve_saddle(A, C, b, c, labels: Optional[Sequence[str]] = None,
                 rtol: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Solve [[A, C^T], [C, 0]] [x; mu] = [b; c].

    A is SPD on its own; C has full row rank. Several right-hand sides may be
    passed as columns of b and c. Dependent constraint rows raise
    DegeneracyError naming the first offending row through `labels`.
    """
    rtol = Config.solver.constraint_tol if rtol is None else rtol
    Cd = _dense(C)
    m, n = Cd.shape
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    if b.shape[0] != n or c.shape[0] != m:
        raise ArgumentError(f"saddle system shapes disagree: A is {n}x{n}, C is {m}x{n}, "
                            f"b has {b.shape[0]} rows, c has {c.shape[0]} rows")
    rank, piv = constraint_rank(Cd)
    if rank < m:
        bad = int(piv[rank])
        name = labels[bad] if labels is not None else f"row {bad}"
        raise DegeneracyError(f"constraint rows are linearly dependent (rank {rank} < {m})", offending=name)

    try:
        factor = SPDFactor(A, "saddle block")
        Y = factor.solve(Cd.T)
        yb = factor.solve(b)
        S = Cd @ Y
        mu = la.solve(S, Cd @ yb - c, assume_a="sym")
        x = yb - Y @ mu
    except (SolverError, la.LinAlgError) as e:
        logger.warning(f"[Saddle] Schur complement route failed ({e}), factoring the full KKT matrix")
        K = sp.bmat([[sp.csr_matrix(A), sp.csr_matrix(Cd).T], [sp.csr_matrix(Cd), None]], format="csc")
        rhs = np.concatenate([b.reshape(n, -1), c.reshape(m, -1)])
        try:
            sol = spla.splu(K).solve(rhs)
        except RuntimeError as e2:
            raise SolverError(f"KKT factorization failed: {e2}")
        x = sol[:n].reshape(b.shape)
        mu = sol[n:].reshape((m,) + b.shape[1:])

    err = max(backward_error(A, x + 0.0, b - Cd.T @ mu) if n else 0.0,
              float(np.max(np.abs(Cd @ x - c))) / max(1.0, float(np.max(np.abs(c)))) if m else 0.0)
    if not np.all(np.isfinite(x)) or err > rtol:
        raise SolverError("saddle-point solve failed", residual=err)
    return x, mu


@dataclass
class EigenPairs:
    values: np.ndarray  # ascending
    vectors: np.ndarray  # columns, B-orthonormal

    def __len__(self):
        return self.values.size


def _count_with_ties(values: np.ndarray, k: int, tie_rtol: Optional[float]) -> int:
    if tie_rtol is None or k == 0 or k >= values.size:
        return min(k, values.size)
    ref = values[k - 1]
    scale = max(abs(ref), 1.0)
    while k < values.size and abs(values[k] - ref) <= tie_rtol * scale:
        k += 1
    return k


def _normalize_signs(V: np.ndarray) -> np.ndarray:
    """Largest-magnitude entry of every column made positive, for reproducible output."""
    if V.size == 0:
        return V
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def smallest_eigenpairs(A, B, k: int, tie_rtol: Optional[float] = None,
                        tol: Optional[float] = None) -> EigenPairs:
    """k smallest eigenpairs of A v = lambda B v, B symmetric positive definite.

    With `tie_rtol` set, eigenvalues equal to the k-th within that relative
    tolerance are kept as well, so more than k pairs may come back.
    """
    tol = Config.solver.eig_tol if tol is None else tol
    n = A.shape[0]
    if k < 0 or k > n:
        raise ArgumentError(f"requested {k} eigenpairs of a {n}-dimensional problem")
    if k == 0:
        return EigenPairs(np.zeros(0), np.zeros((n, 0)))

    if n <= Config.solver.dense_limit or k >= n - 1:
        Ad, Bd = _dense(A), _dense(B)
        Ad, Bd = 0.5 * (Ad + Ad.T), 0.5 * (Bd + Bd.T)
        try:
            values, vectors = la.eigh(Ad, Bd)
        except la.LinAlgError as e:
            raise SolverError(f"dense generalized eigensolve ({n}x{n}) failed: {e}")
    else:
        extra = min(n - 1, k + 4)
        shift = -1e-8 * _norm(A) / max(_norm(B), 1e-300)
        v0 = np.random.default_rng(Config.solver.eig_seed).random(n)
        try:
            values, vectors = spla.eigsh(sp.csc_matrix(A), k=extra, M=sp.csc_matrix(B), sigma=shift,
                                         which="LM", v0=v0, tol=0.1 * tol)
        except spla.ArpackError as e:
            raise SolverError(f"ARPACK did not converge for a {n}x{n} pencil: {e}")
        order = np.argsort(values)
        values, vectors = values[order], vectors[:, order]

    count = _count_with_ties(values, k, tie_rtol)
    values, vectors = values[:count], _normalize_signs(vectors[:, :count])

    res = A @ vectors - (B @ vectors) * values
    scale = (_norm(A) + np.abs(values) * _norm(B)) * np.linalg.norm(vectors, axis=0)
    scale[scale == 0] = 1.0
    worst = float(np.max(np.linalg.norm(res, axis=0) / scale))
    if worst > tol:
        raise SolverError("generalized eigensolve residual too large", residual=worst)
    return EigenPairs(values, vectors)


def null_space_basis(C, rtol: Optional[float] = None) -> np.ndarray:
    """Orthonormal (Euclidean) basis of {v : C v = 0}."""
    rtol = Config.solver.rank_tol if rtol is None else rtol
    Cd = _dense(C)
    if Cd.shape[0] == 0:
        return np.eye(Cd.shape[1])
    return la.null_space(Cd, rcond=rtol)


def constrained_smallest_eigenpairs(A, B, C, k: int, tie_rtol: Optional[float] = None) -> EigenPairs:
    """Smallest eigenpairs of (A, B) restricted to the kernel of the rows of C."""
    Z = null_space_basis(C)
    if k > Z.shape[1]:
        raise ArgumentError(f"requested {k} eigenpairs but the constrained subspace has dimension {Z.shape[1]}")
    Az = Z.T @ (A @ Z)
    Bz = Z.T @ (B @ Z)
    pairs = smallest_eigenpairs(Az, Bz, k, tie_rtol=tie_rtol)
    return EigenPairs(pairs.values, _normalize_signs(Z @ pairs.vectors))


def gram_condition(G) -> float:
    G = _dense(G)
    if G.size == 0:
        return 1.0
    return float(np.linalg.cond(G))
