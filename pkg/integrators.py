#!/usr/bin/env python3
"""Time integrators for M u'' + A u = f and their discrete energies."""

import logging
import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from dataclasses import dataclass, field
from typing import Callable, Iterable, List, Optional, Tuple

from config import Config, Scheme, steps_for
from errors import ArgumentError, InstabilityError, PreconditionError, SolverError
from linsolve import SPDFactor, gram_condition

logger = logging.getLogger(__name__)

SPLIT_SCHEMES = (Scheme.SPLIT_OMEGA1, Scheme.SPLIT_OMEGA0, Scheme.SPLIT_LUMPED)


def _dense(X) -> np.ndarray:
    return X.toarray() if sp.issparse(X) else np.asarray(X, dtype=float)


# ---------------------------------------------------------------------------
# Single-space three-level schemes
# ---------------------------------------------------------------------------

class WeightedStepper:
    """(M + sigma tau^2 A) u^{n+1} = M(2u^n - u^{n-1}) - tau^2 A((1-2sigma)u^n + sigma u^{n-1}) + tau^2 f^n.

    sigma = 1/4 is the Crank-Nicolson type implicit scheme, sigma = 0 leapfrog.
    The left-hand side is factored once.
    """

    def __init__(self, M, A, tau: float, sigma: float):
        if tau <= 0:
            raise ArgumentError(f"time step must be positive, got {tau}")
        if sigma < 0:
            raise ArgumentError(f"sigma must be >= 0, got {sigma}")
        self.M, self.A, self.tau, self.sigma = M, A, tau, sigma
        lhs = M if sigma == 0 else M + (sigma * tau * tau) * A
        self._factor = SPDFactor(lhs, f"weighted scheme operator (sigma={sigma})")

    def step(self, prev: np.ndarray, cur: np.ndarray, f: Optional[np.ndarray] = None) -> np.ndarray:
        t2 = self.tau * self.tau
        s = self.sigma
        rhs = self.M @ (2.0 * cur - prev) - t2 * (self.A @ ((1.0 - 2.0 * s) * cur + s * prev))
        if f is not None:
            rhs = rhs + t2 * f
        return self._factor.solve(rhs)


def step_weighted(M, A, state: Tuple[np.ndarray, np.ndarray], tau: float, sigma: float,
                  f: Optional[np.ndarray] = None) -> np.ndarray:
    """u^{n+1} from state = (u^{n-1}, u^n)."""
    return WeightedStepper(M, A, tau, sigma).step(state[0], state[1], f)


def step_implicit(M, A, state: Tuple[np.ndarray, np.ndarray], tau: float, f: Optional[np.ndarray] = None) -> np.ndarray:
    return step_weighted(M, A, state, tau, 0.25, f)


def step_explicit(M, A, state: Tuple[np.ndarray, np.ndarray], tau: float, f: Optional[np.ndarray] = None) -> np.ndarray:
    return step_weighted(M, A, state, tau, 0.0, f)


def weighted_energy(M, A, prev: np.ndarray, cur: np.ndarray, tau: float, sigma: float) -> float:
    """||r||_M^2 + (sigma - 1/4) tau^2 ||r||_A^2 + ||s||_A^2, r = (u' - u)/tau, s = (u' + u)/2."""
    r = (cur - prev) / tau
    s = 0.5 * (cur + prev)
    Ar = A @ r
    return float(r @ (M @ r) + (sigma - 0.25) * tau * tau * (r @ Ar) + s @ (A @ s))


def implicit_energy(M, A, prev, cur, tau) -> float:
    return weighted_energy(M, A, prev, cur, tau, 0.25)


def explicit_energy(M, A, prev, cur, tau) -> float:
    """Leapfrog energy, carrying the -tau^2/4 ||r||_A^2 correction."""
    return weighted_energy(M, A, prev, cur, tau, 0.0)


# ---------------------------------------------------------------------------
# Partially explicit splitting
# ---------------------------------------------------------------------------

@dataclass
class SplitBlocks:
    """Mass and stiffness in [V_H1 | V_H2] coordinates."""

    M11: np.ndarray
    M12: np.ndarray
    M22: np.ndarray
    A11: np.ndarray
    A12: np.ndarray
    A22: np.ndarray
    lumped: bool = False

    @property
    def n1(self) -> int:
        return self.M11.shape[0]

    @property
    def n2(self) -> int:
        return self.M22.shape[0]

    @property
    def M(self) -> np.ndarray:
        return np.block([[self.M11, self.M12], [self.M12.T, self.M22]])

    @property
    def A(self) -> np.ndarray:
        return np.block([[self.A11, self.A12], [self.A12.T, self.A22]])

    def split(self, v: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return v[:self.n1], v[self.n1:]

    @classmethod
    def from_matrices(cls, M, A, n1: int, lumped: bool = False) -> "SplitBlocks":
        M, A = _dense(M), _dense(A)
        return cls(M[:n1, :n1], M[:n1, n1:], M[n1:, n1:], A[:n1, :n1], A[:n1, n1:], A[n1:, n1:], lumped)

    @classmethod
    def from_pair(cls, pair, M_fine, A_fine, use_surrogate: bool = False) -> "SplitBlocks":
        P = pair.prolongation()
        A = _dense(P.T @ (A_fine @ P))
        if use_surrogate:
            if pair.mass_surrogate is None:
                raise PreconditionError("space pair carries no lumped mass surrogate")
            M = np.asarray(pair.mass_surrogate)
        else:
            M = _dense(P.T @ (M_fine @ P))
        return cls.from_matrices(0.5 * (M + M.T), 0.5 * (A + A.T), pair.n1, lumped=use_surrogate)

    def is_orthogonal(self, tol: Optional[float] = None) -> bool:
        tol = Config.solver.orthogonality_tol if tol is None else tol
        if self.n1 == 0 or self.n2 == 0:
            return True
        scale = np.sqrt(np.linalg.norm(self.M11, 2) * np.linalg.norm(self.M22, 2))
        return bool(np.linalg.norm(self.M12, 2) <= tol * scale)


@dataclass
class SplitState:
    """(u1^{n-1}, u2^{n-1}) and (u1^n, u2^n) in basis coordinates."""

    prev1: np.ndarray
    prev2: np.ndarray
    cur1: np.ndarray
    cur2: np.ndarray

    @classmethod
    def from_full(cls, prev: np.ndarray, cur: np.ndarray, n1: int) -> "SplitState":
        return cls(prev[:n1], prev[n1:], cur[:n1], cur[n1:])

    @property
    def prev(self) -> np.ndarray:
        return np.concatenate([self.prev1, self.prev2])

    @property
    def cur(self) -> np.ndarray:
        return np.concatenate([self.cur1, self.cur2])

    def advance(self, next1: np.ndarray, next2: np.ndarray) -> "SplitState":
        return SplitState(self.cur1, self.cur2, next1, next2)


class SplitStepper:
    """Implicit in V_H1, explicit in V_H2. The V_H2 stiffness block is never inverted.

    Row V_H1: (M11 + tau^2/2 A11) u1' + M12 u2' = [M11 M12](2u - u_) - tau^2/2 A11 u1_ - tau^2 A12 u2 + tau^2 f1
    Row V_H2: (M21 + (1-w) tau^2/2 A21) u1' + M22 u2'
              = [M21 M22](2u - u_) - tau^2 (w A21 u1 + (1-w)/2 A21 u1_ + A22 u2) + tau^2 f2
    """

    def __init__(self, blocks: SplitBlocks, tau: float, omega: float = 1.0):
        if tau <= 0:
            raise ArgumentError(f"time step must be positive, got {tau}")
        if not 0.0 <= omega <= 1.0:
            raise ArgumentError(f"omega must lie in [0, 1], got {omega}")
        self.b, self.tau, self.omega = blocks, tau, omega
        t2 = tau * tau
        b = blocks
        if b.lumped:
            off = b.M22 - np.diag(np.diag(b.M22))
            scale = max(float(np.max(np.abs(np.diag(b.M22)))) if b.n2 else 1.0, 1e-300)
            if (b.n2 and np.max(np.abs(off)) > 1e-8 * scale) or (b.n1 and b.n2 and np.max(np.abs(b.M12)) > 1e-8 * scale):
                raise PreconditionError("lumped splitting needs a block-diagonal mass with diagonal M22")
            self._f11 = SPDFactor(b.M11 + 0.5 * t2 * b.A11, "lumped V_H1 operator") if b.n1 else None
            self._d22 = np.diag(b.M22).copy()
        else:
            K = np.block([[b.M11 + 0.5 * t2 * b.A11, b.M12],
                          [b.M12.T + (1.0 - omega) * 0.5 * t2 * b.A12.T, b.M22]])
            cond = np.linalg.cond(K) if K.size else 1.0
            if not np.isfinite(cond) or cond * np.finfo(float).eps > 1.0:
                raise SolverError(f"split block system is singular (Gram condition "
                                  f"{gram_condition(b.M):.3e})")
            self._lu = la.lu_factor(K)

    def rhs(self, s: SplitState, f1=None, f2=None) -> Tuple[np.ndarray, np.ndarray]:
        b, t2, w = self.b, self.tau * self.tau, self.omega
        d1, d2 = 2.0 * s.cur1 - s.prev1, 2.0 * s.cur2 - s.prev2
        r1 = b.M11 @ d1 + b.M12 @ d2 - 0.5 * t2 * (b.A11 @ s.prev1) - t2 * (b.A12 @ s.cur2)
        r2 = (b.M12.T @ d1 + b.M22 @ d2
              - t2 * (b.A12.T @ (w * s.cur1 + 0.5 * (1.0 - w) * s.prev1) + b.A22 @ s.cur2))
        if f1 is not None:
            r1 = r1 + t2 * f1
        if f2 is not None:
            r2 = r2 + t2 * f2
        return r1, r2

    def step(self, s: SplitState, f1=None, f2=None) -> SplitState:
        r1, r2 = self.rhs(s, f1, f2)
        b = self.b
        if b.lumped:
            u1 = self._f11.solve(r1) if b.n1 else r1
            coupling = (1.0 - self.omega) * 0.5 * self.tau ** 2 * (b.A12.T @ u1)
            u2 = (r2 - coupling) / self._d22 if b.n2 else r2
            return s.advance(u1, u2)
        u = la.lu_solve(self._lu, np.concatenate([r1, r2]))
        return s.advance(u[:b.n1], u[b.n1:])


def step_split(blocks: SplitBlocks, state: SplitState, tau: float, omega: float = 1.0,
               f: Optional[Tuple[np.ndarray, np.ndarray]] = None) -> SplitState:
    f1, f2 = f if f is not None else (None, None)
    return SplitStepper(blocks, tau, omega).step(state, f1, f2)


def splitting_energy(blocks: SplitBlocks, state: SplitState, tau: float) -> float:
    """E^{n+1/2} for state = (u^n, u^{n+1}).

    ||du||^2 + tau^2/2 sum_i (||u_i^{n+1}||_a^2 + ||u_i^n||_a^2)
    + tau^2 a(u2^{n+1}, u1^n) + tau^2 a(u1^{n+1}, u2^n) - tau^2/2 ||du2||_a^2
    """
    b, t2 = blocks, tau * tau
    o1, o2, n1, n2 = state.prev1, state.prev2, state.cur1, state.cur2
    d = state.cur - state.prev
    dd2 = n2 - o2
    return float(d @ (b.M @ d)
                 + 0.5 * t2 * (n1 @ (b.A11 @ n1) + o1 @ (b.A11 @ o1) + n2 @ (b.A22 @ n2) + o2 @ (b.A22 @ o2))
                 + t2 * (o1 @ (b.A12 @ n2)) + t2 * (n1 @ (b.A12 @ o2))
                 - 0.5 * t2 * (dd2 @ (b.A22 @ dd2)))


class Omega0Operators:
    """Operators behind the omega = 0 energy on an M-orthogonal pair.

    m(u, v) = (u, v) + tau^2/2 a(u, v) on V_H1;
    b(v1) = m^{-1} M11 v1, c(v2) = m^{-1} tau^2/2 A12 v2, d(v2) = A11^{-1} A12 v2.
    """

    def __init__(self, blocks: SplitBlocks, tau: float):
        if not blocks.is_orthogonal():
            raise PreconditionError("the omega = 0 energy needs M-orthogonal V_H1 and V_H2")
        self.blocks, self.tau = blocks, tau
        self.m = blocks.M11 + 0.5 * tau * tau * blocks.A11
        self._m = SPDFactor(self.m, "m_tau") if blocks.n1 else None
        self._a = SPDFactor(blocks.A11, "A11") if blocks.n1 else None

    def b(self, v1):
        return self._m.solve(self.blocks.M11 @ v1) if self._m else v1

    def c(self, v2):
        if not self._m:
            return np.zeros(0)
        return self._m.solve(0.5 * self.tau ** 2 * (self.blocks.A12 @ v2))

    def d(self, v2):
        return self._a.solve(self.blocks.A12 @ v2) if self._a else np.zeros(0)

    def m_norm2(self, v1) -> float:
        return float(v1 @ (self.m @ v1))

    def s_norm2(self, v1) -> float:
        """||v1||^2 - ||b(v1)||_m^2."""
        bv = self.b(v1)
        return float(v1 @ (self.blocks.M11 @ v1) - bv @ (self.m @ bv))

    def n_norm2(self, v2) -> float:
        """tau^2/2 ||v2||_a^2 - ||c(v2)||_m^2 - ||d(v2)||_s^2."""
        cv = self.c(v2)
        return float(0.5 * self.tau ** 2 * (v2 @ (self.blocks.A22 @ v2)) - self.m_norm2(cv) - self.s_norm2(self.d(v2)))

    def energy(self, state: SplitState) -> float:
        """E^{n+1/2} for state = (u^n, u^{n+1})."""
        b, t2 = self.blocks, self.tau ** 2
        w_new = self.b(state.cur1) - self.c(state.cur2)
        w_old = self.b(state.prev1) - self.c(state.prev2)
        dw = w_new - w_old
        dd2 = state.cur2 - state.prev2
        level = 0.0
        for u1, u2 in ((state.cur1, state.cur2), (state.prev1, state.prev2)):
            level += self.s_norm2(u1 + self.d(u2)) + self.n_norm2(u2)
        return float(self.m_norm2(dw) + dd2 @ (b.M22 @ dd2) - 0.5 * t2 * (dd2 @ (b.A22 @ dd2)) + level)


def omega0_energy(blocks: SplitBlocks, state: SplitState, tau: float) -> float:
    return Omega0Operators(blocks, tau).energy(state)


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------

@dataclass
class SchemeConfig:
    scheme: Scheme
    tau: float
    T: float
    sigma: float = Config.SIGMA
    omega: float = 1.0
    u0: Optional[np.ndarray] = field(default=None, repr=False)
    v0: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def steps(self) -> int:
        return steps_for(self.T, self.tau)

    @property
    def effective_omega(self) -> float:
        if self.scheme == Scheme.SPLIT_OMEGA1:
            return 1.0
        if self.scheme == Scheme.SPLIT_OMEGA0:
            return 0.0
        return self.omega


@dataclass
class WaveSystem:
    """M u'' + A u = envelope(t) * load in some set of coordinates."""

    M: object = field(repr=False)
    A: object = field(repr=False)
    load: Optional[np.ndarray] = field(default=None, repr=False)
    envelope: Optional[Callable[[float], float]] = field(default=None, repr=False)
    blocks: Optional[SplitBlocks] = field(default=None, repr=False)
    prolongation: Optional[sp.spmatrix] = field(default=None, repr=False)
    name: str = "fine"

    @property
    def dim(self) -> int:
        return self.M.shape[0]

    def forcing(self, t: float) -> Optional[np.ndarray]:
        if self.load is None or self.envelope is None:
            return None
        return self.envelope(t) * self.load

    def to_fine(self, coeffs: np.ndarray) -> np.ndarray:
        """Fine dof values; rows of `coeffs` are states."""
        if self.prolongation is None:
            return coeffs
        coeffs = np.asarray(coeffs)
        if coeffs.ndim == 1:
            return self.prolongation @ coeffs
        return np.asarray(self.prolongation @ coeffs.T).T

    @classmethod
    def coarse(cls, P, M_fine, A_fine, load_fine=None, envelope=None, n1: Optional[int] = None,
               mass_override: Optional[np.ndarray] = None, name: str = "coarse") -> "WaveSystem":
        """Galerkin projection through the columns of P (load included)."""
        P = sp.csc_matrix(P)
        A = _dense(P.T @ (A_fine @ P))
        M = np.asarray(mass_override) if mass_override is not None else _dense(P.T @ (M_fine @ P))
        M, A = 0.5 * (M + M.T), 0.5 * (A + A.T)
        load = None if load_fine is None else np.asarray(P.T @ load_fine).ravel()
        blocks = None if n1 is None else SplitBlocks.from_matrices(M, A, n1, lumped=mass_override is not None)
        return cls(M, A, load, envelope, blocks, P, name)


@dataclass
class EnergyTrace:
    """E^{n+1/2} per step, plus the cumulative work done by the load.

    `work[k] - work[0]` is what the forcing injected between the first stored
    energy and `values[k]`; None for an unforced run. `balanced` is False when
    the run is forced and the scheme's energy balance under a load is not known
    (omega = 0).
    """

    scheme: Scheme
    values: np.ndarray
    work: Optional[np.ndarray] = None
    balanced: bool = True

    @property
    def steps(self) -> np.ndarray:
        """E^{n+1/2} is stored against n = 1 .. N-1."""
        return np.arange(1, self.values.size + 1)

    def balance_residual(self) -> np.ndarray:
        """(E_k - E_0) - (W_k - W_0); zero up to round-off for a conservative scheme."""
        if self.values.size == 0:
            return np.zeros(0)
        if not self.balanced:
            return np.full_like(self.values, np.nan)
        delta = self.values - self.values[0]
        if self.work is None:
            return delta
        return delta - (self.work - self.work[0])

    def max_relative_drift(self) -> float:
        """Largest balance residual over the largest energy seen in the run.

        Scaling by the peak keeps runs that start from rest (E_0 ~ 0) meaningful.
        """
        finite = np.isfinite(self.values)
        if np.count_nonzero(finite) < 2 or not finite[0]:
            return 0.0
        res = self.balance_residual()[finite]
        if not np.all(np.isfinite(res)):
            return float("nan")
        ref = max(float(np.max(np.abs(self.values[finite]))), 1e-300)
        return float(np.max(np.abs(res)) / ref)

    def growth(self) -> float:
        """Peak energy over the first stored one (inf when the run starts from rest)."""
        v = self.values[np.isfinite(self.values)]
        if v.size == 0:
            return float("nan")
        peak = float(np.max(np.abs(v)))
        return peak / abs(v[0]) if v[0] != 0 else (1.0 if peak == 0 else float("inf"))


@dataclass
class RunResult:
    scheme: Scheme
    tau: float
    times: np.ndarray
    states: np.ndarray = field(repr=False)  # (len(times), dim) coefficients
    energy: EnergyTrace = field(repr=False)
    steps: int = 0

    def at(self, t: float) -> np.ndarray:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-9 * max(1.0, abs(t)):
            raise ArgumentError(f"time {t} was not recorded")
        return self.states[k]


def _energy_function(cfg: SchemeConfig, system: WaveSystem) -> Callable:
    tau = cfg.tau
    if cfg.scheme in SPLIT_SCHEMES:
        b = system.blocks
        omega = cfg.effective_omega
        if omega == 1.0:
            return lambda prev, cur: splitting_energy(b, SplitState.from_full(prev, cur, b.n1), tau)
        if omega == 0.0:
            try:
                ops = Omega0Operators(b, tau)
                return lambda prev, cur: ops.energy(SplitState.from_full(prev, cur, b.n1))
            except PreconditionError as e:
                logger.warning(f"[Integrator] {cfg.scheme.value}: {e}; energy trace left as NaN")
        else:
            logger.warning(f"[Integrator] no conserved energy known for omega={omega}; energy trace left as NaN")
        return lambda prev, cur: float("nan")
    sigma = {Scheme.EXPLICIT: 0.0, Scheme.WEIGHTED: cfg.sigma}.get(cfg.scheme, 0.25)
    return lambda prev, cur: weighted_energy(system.M, system.A, prev, cur, tau, sigma)


def _work_scale(cfg: SchemeConfig) -> Optional[float]:
    """Factor c in E^{n+1/2} - E^{n-1/2} = c f^n . (u^{n+1} - u^{n-1}); None if unknown."""
    if cfg.scheme in SPLIT_SCHEMES:
        return cfg.tau * cfg.tau if cfg.effective_omega == 1.0 else None
    return 1.0


def _make_stepper(cfg: SchemeConfig, system: WaveSystem) -> Callable:
    if cfg.scheme in SPLIT_SCHEMES:
        if system.blocks is None:
            raise PreconditionError(f"{cfg.scheme.value} needs a system built from a space pair")
        stepper = SplitStepper(system.blocks, cfg.tau, cfg.effective_omega)
        n1 = system.blocks.n1

        def split_step(prev, cur, f):
            f1, f2 = (None, None) if f is None else (f[:n1], f[n1:])
            nxt = stepper.step(SplitState.from_full(prev, cur, n1), f1, f2)
            return np.concatenate([nxt.cur1, nxt.cur2])
        return split_step
    sigma = {Scheme.EXPLICIT: 0.0, Scheme.WEIGHTED: cfg.sigma}.get(cfg.scheme, 0.25)
    return WeightedStepper(system.M, system.A, cfg.tau, sigma).step


def _record_steps(times: Optional[Iterable[float]], tau: float, N: int) -> List[int]:
    if times is None:
        return list(range(N + 1))
    out = set()
    for t in times:
        k = int(round(t / tau))
        if abs(k * tau - t) > 1e-9 * max(1.0, abs(t)):
            logger.warning(f"[Integrator] snapshot t={t} is not on the tau={tau} grid, using step {k}")
        if 0 <= k <= N:
            out.add(k)
        else:
            logger.warning(f"[Integrator] snapshot t={t} outside [0, {N * tau}], skipped")
    return sorted(out)


def run(cfg: SchemeConfig, system: WaveSystem, record_times: Optional[Iterable[float]] = None) -> RunResult:
    """March N = round(T / tau) steps, recording states at `record_times` (every step if None)."""
    N = cfg.steps
    tau = cfg.tau
    n = system.dim
    u0 = np.zeros(n) if cfg.u0 is None else np.asarray(cfg.u0, dtype=float)
    v0 = np.zeros(n) if cfg.v0 is None else np.asarray(cfg.v0, dtype=float)
    if u0.shape != (n,) or v0.shape != (n,):
        raise ArgumentError(f"initial data must have length {n}")
    M = system.blocks.M if (cfg.scheme in SPLIT_SCHEMES and system.blocks is not None) else system.M

    step = _make_stepper(cfg, system)
    energy = _energy_function(cfg, system)
    wanted = _record_steps(record_times, tau, N)
    wanted_set = set(wanted)
    recorded = {}

    f0 = system.forcing(0.0)
    acc = -(system.A @ u0) if f0 is None else f0 - system.A @ u0
    u_prev = u0
    u_cur = u0 + tau * v0 + 0.5 * tau * tau * SPDFactor(M, "mass").solve(acc)
    if not np.all(np.isfinite(u_cur)):
        raise InstabilityError(f"{cfg.scheme.value}: non-finite start-up state", step=1)
    if 0 in wanted_set:
        recorded[0] = u_prev.copy()
    if 1 in wanted_set:
        recorded[1] = u_cur.copy()

    energies = np.empty(max(N - 1, 0))
    scale = _work_scale(cfg)
    injected = np.zeros_like(energies)
    balanced = True
    logger.info(f"[Integrator] {cfg.scheme.value} on {system.name}: dim {n}, tau={tau:g}, {N} steps")
    for k in range(1, N):
        f = system.forcing(k * tau)
        u_next = step(u_prev, u_cur, f)
        if not np.all(np.isfinite(u_next)):
            raise InstabilityError(f"{cfg.scheme.value}: non-finite values", step=k + 1)
        energies[k - 1] = energy(u_cur, u_next)
        if f is not None:
            if scale is None:
                balanced = False
            else:
                injected[k - 1] = scale * float(f @ (u_next - u_prev))
        u_prev, u_cur = u_cur, u_next
        if k + 1 in wanted_set:
            recorded[k + 1] = u_cur.copy()
        if k % 500 == 0:
            logger.debug(f"[Integrator] {cfg.scheme.value} step {k}/{N}, E={energies[k - 1]:.6e}")

    times = np.array([k * tau for k in wanted])
    states = np.array([recorded[k] for k in wanted]) if wanted else np.zeros((0, n))
    trace = EnergyTrace(cfg.scheme, energies, np.cumsum(injected) if system.load is not None else None, balanced)
    logger.info(f"[Integrator] {cfg.scheme.value} done, relative energy drift {trace.max_relative_drift():.3e}")
    return RunResult(cfg.scheme, tau, times, states, trace, N)
