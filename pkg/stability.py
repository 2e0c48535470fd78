#!/usr/bin/env python3
"""Stability constants (alpha, gamma, gamma_a) and time-step certification."""

import json
import math
import logging
import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from pathlib import Path
from dataclasses import dataclass, asdict
from typing import Optional

from config import Config, StabilityMode
from errors import ArgumentError, SolverError
from integrators import SplitBlocks, SplitState

logger = logging.getLogger(__name__)


def _dense(X) -> np.ndarray:
    return X.toarray() if sp.issparse(X) else np.asarray(X, dtype=float)


def compute_alpha(A22, M22) -> float:
    """alpha = sup ||v||_a / ||v|| = sqrt(lambda_max(A22, M22))."""
    n = A22.shape[0]
    if n == 0:
        return 0.0
    try:
        if n <= Config.solver.dense_limit or not sp.issparse(A22):
            A, M = _dense(A22), _dense(M22)
            lam = la.eigh(0.5 * (A + A.T), 0.5 * (M + M.T), eigvals_only=True, subset_by_index=[n - 1, n - 1])[0]
        else:
            v0 = np.ones(n)
            lam = spla.eigsh(sp.csc_matrix(A22), k=1, M=sp.csc_matrix(M22), which="LA", v0=v0,
                             tol=Config.solver.eig_tol, return_eigenvectors=False)[0]
    except (la.LinAlgError, spla.ArpackError) as e:
        raise SolverError(f"largest eigenvalue of a {n}x{n} pencil failed: {e}")
    return float(math.sqrt(max(float(lam), 0.0)))


def _cosine(B11, B12, B22) -> float:
    """Largest singular value of L1^{-1} B12 L2^{-T}, B = L L^T."""
    if B11.shape[0] == 0 or B22.shape[0] == 0:
        return 0.0
    try:
        L1 = la.cholesky(0.5 * (B11 + B11.T), lower=True)
        L2 = la.cholesky(0.5 * (B22 + B22.T), lower=True)
    except la.LinAlgError as e:
        raise SolverError(f"diagonal block is not positive definite: {e}")
    X = la.solve_triangular(L1, B12, lower=True)
    X = la.solve_triangular(L2, X.T, lower=True).T
    return float(min(np.linalg.norm(X, 2), 1.0))


def compute_gammas(M11, M12, M22, A11, A12, A22):
    """(gamma, gamma_a): L2 and energy cosines between V_H1 and V_H2."""
    gamma = _cosine(_dense(M11), _dense(M12), _dense(M22))
    gamma_a = _cosine(_dense(A11), _dense(A12), _dense(A22))
    return gamma, gamma_a


@dataclass
class StabilityConstants:
    alpha: float = 0.0  # on V_H2
    alpha_full: Optional[float] = None  # on the space a fully explicit scheme would use
    gamma: float = 0.0
    gamma_a: float = 0.0

    @classmethod
    def from_blocks(cls, blocks: SplitBlocks, with_full: bool = True) -> "StabilityConstants":
        gamma, gamma_a = compute_gammas(blocks.M11, blocks.M12, blocks.M22, blocks.A11, blocks.A12, blocks.A22)
        alpha_full = compute_alpha(blocks.A, blocks.M) if with_full else None
        logger.debug(f"[Stability] n1={blocks.n1}, n2={blocks.n2}: gamma={gamma:.4e}, gamma_a={gamma_a:.4e}")
        return cls(compute_alpha(blocks.A22, blocks.M22), alpha_full, gamma, gamma_a)


@dataclass
class StabilityReport:
    mode: str
    tau: float
    alpha: float
    alpha_full: Optional[float]
    gamma: float
    gamma_a: float
    tau_max_explicit: Optional[float]
    tau_max_split: float
    tau_max_nonortho: float
    tau_max_nonortho_stated: float
    tau_max_weighted: Optional[float]
    sigma: Optional[float]
    tau_max: float
    passed: bool

    def to_dict(self) -> dict:
        out = asdict(self)
        return {k: (None if isinstance(v, float) and math.isinf(v) else v) for k, v in out.items()}

    def to_json(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)


def _bound(numerator: float, alpha: Optional[float]) -> float:
    """sqrt(numerator) / alpha, infinite when alpha vanishes."""
    if alpha is None:
        return math.inf
    if numerator <= 0:
        return 0.0
    return math.inf if alpha == 0 else math.sqrt(numerator) / alpha


def certify(tau: float, constants: StabilityConstants, mode: StabilityMode,
            sigma: Optional[float] = None) -> StabilityReport:
    """Check tau against the condition of the given mode.

    cfl:      tau^2 <= 4 / alpha_full^2
    ortho:    tau^2 <= 2 / alpha^2
    nonortho: tau^2 <= 2 (1 - gamma^2) / alpha^2  (the 2 (1 - gamma) form is reported too)
    weighted: unconditional for sigma >= 1/4, else tau^2 <= 4 / ((1 - 4 sigma) alpha_full^2)
    """
    if tau <= 0:
        raise ArgumentError(f"time step must be positive, got {tau}")
    c = constants
    tau_cfl = _bound(4.0, c.alpha_full) if c.alpha_full is not None else None
    tau_split = _bound(2.0, c.alpha)
    tau_nonortho = _bound(2.0 * (1.0 - c.gamma ** 2), c.alpha)
    tau_stated = _bound(2.0 * (1.0 - c.gamma), c.alpha)
    tau_weighted = None
    if sigma is not None:
        tau_weighted = math.inf if sigma >= 0.25 else _bound(4.0 / (1.0 - 4.0 * sigma), c.alpha_full)

    if mode == StabilityMode.CFL:
        if tau_cfl is None:
            raise ArgumentError("cfl mode needs alpha on the full space")
        limit = tau_cfl
    elif mode == StabilityMode.ORTHO:
        limit = tau_split
    elif mode == StabilityMode.NONORTHO:
        limit = tau_nonortho
    elif mode == StabilityMode.WEIGHTED:
        if sigma is None:
            raise ArgumentError("weighted mode needs sigma")
        limit = tau_weighted
    else:
        raise ArgumentError(f"unknown stability mode {mode}")

    passed = tau <= limit * (1.0 + 1e-12)
    report = StabilityReport(mode.value, tau, c.alpha, c.alpha_full, c.gamma, c.gamma_a, tau_cfl, tau_split,
                             tau_nonortho, tau_stated, tau_weighted, sigma, limit, bool(passed))
    if passed:
        logger.info(f"[Stability] {mode.value}: tau={tau:g} <= tau_max={limit:.4g}")
    else:
        logger.warning(f"[Stability] {mode.value}: tau={tau:g} exceeds tau_max={limit:.4g}")
    return report


def energy_lower_bound(blocks: SplitBlocks, state: SplitState, tau: float, constants: StabilityConstants) -> float:
    """(1 - gamma^2 - tau^2 alpha^2 / 2) ||du2||^2 + tau^2/4 ||u^{n+1} + u^n||_a^2.

    The splitting energy equals ||du||^2 + tau^2/4 ||u^{n+1} + u^n||_a^2
    + tau^2/4 ||du1 - du2||_a^2 - tau^2/2 ||du2||_a^2, which is never below this
    value; it is nonnegative whenever the non-orthogonal step condition holds.
    """
    b = blocks
    d2 = state.cur2 - state.prev2
    s = state.cur + state.prev
    slack = 1.0 - constants.gamma ** 2 - 0.5 * tau * tau * constants.alpha ** 2
    return float(slack * (d2 @ (b.M22 @ d2)) + 0.25 * tau * tau * (s @ (b.A @ s)))
