#!/usr/bin/env python3
"""Errors against the fine reference, energy diagnostics, CSV and raster export."""

import logging
import numpy as np
import cv2
from pathlib import Path
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

from config import Config
from errors import ArgumentError, DataError
from grid import TwoLevelMesh
from integrators import EnergyTrace

logger = logging.getLogger(__name__)


@dataclass
class ErrorSeries:
    times: np.ndarray
    l2: np.ndarray
    energy: np.ndarray
    label: str = ""

    def __len__(self):
        return self.times.size

    def window(self, lo: float, hi: float) -> "ErrorSeries":
        """Entries with lo <= t <= hi."""
        if lo > hi:
            raise ArgumentError(f"window [{lo}, {hi}] is reversed")
        keep = (self.times >= lo - 1e-12) & (self.times <= hi + 1e-12)
        return ErrorSeries(self.times[keep], self.l2[keep], self.energy[keep], self.label)

    def final(self) -> Tuple[float, float]:
        if not len(self):
            return float("nan"), float("nan")
        return float(self.l2[-1]), float(self.energy[-1])


@dataclass
class Snapshot:
    """Fine nodal values at one time, laid out as a (ny+1, nx+1) grid."""

    time: float
    grid: np.ndarray = field(repr=False)


def _norm(op, v: np.ndarray) -> float:
    return float(np.sqrt(max(float(v @ (op @ v)), 0.0)))


def _relative(op, err: np.ndarray, ref: np.ndarray) -> float:
    """||err|| / ||ref||; the absolute norm when the reference vanishes."""
    num, den = _norm(op, err), _norm(op, ref)
    return num / den if den > 0 else num


def _match(times: np.ndarray, ref_times: np.ndarray) -> np.ndarray:
    idx = np.empty(times.size, dtype=int)
    for k, t in enumerate(times):
        j = int(np.argmin(np.abs(ref_times - t))) if ref_times.size else -1
        if j < 0 or abs(ref_times[j] - t) > 1e-9 * max(1.0, abs(t)):
            raise ArgumentError(f"reference has no snapshot at t={t}")
        idx[k] = j
    return idx


def compare(times: np.ndarray, fine_values: np.ndarray, ref_times: np.ndarray, ref_values: np.ndarray,
            M, A, label: str = "") -> ErrorSeries:
    """Relative L2 (M) and energy (A) errors of prolonged coarse states against the reference."""
    times, ref_times = np.asarray(times, dtype=float), np.asarray(ref_times, dtype=float)
    fine_values, ref_values = np.atleast_2d(fine_values), np.atleast_2d(ref_values)
    if fine_values.shape[0] != times.size:
        raise ArgumentError(f"{fine_values.shape[0]} states for {times.size} times")
    idx = _match(times, ref_times)
    l2 = np.empty(times.size)
    en = np.empty(times.size)
    for k, j in enumerate(idx):
        e = fine_values[k] - ref_values[j]
        l2[k] = _relative(M, e, ref_values[j])
        en[k] = _relative(A, e, ref_values[j])
    return ErrorSeries(times, l2, en, label)


def continuous_energy(times: np.ndarray, values: np.ndarray, M, A) -> np.ndarray:
    """||u_t||^2 + ||u||_a^2 with centered differences of the recorded states.

    Same scale as the discrete energies of the weighted schemes.

    The first and last entries use one-sided differences.
    """
    values = np.atleast_2d(values)
    n = values.shape[0]
    out = np.full(n, np.nan)
    if n < 2:
        return out
    vel = np.gradient(values, np.asarray(times, dtype=float), axis=0)
    for k in range(n):
        out[k] = float(vel[k] @ (M @ vel[k])) + float(values[k] @ (A @ values[k]))
    return out


def nodal_grid(mesh: TwoLevelMesh, dof_values: np.ndarray) -> np.ndarray:
    """Dof vector -> (ny+1, nx+1) nodal grid, zero on the boundary."""
    if dof_values.size != mesh.n_dofs:
        raise DataError(f"expected {mesh.n_dofs} dof values, got {dof_values.size}")
    out = np.zeros(mesh.n_nodes)
    out[mesh.node_of_dof()] = dof_values
    return out.reshape(mesh.ny_fine + 1, mesh.nx_fine + 1)


def export_csv(obj: Union[ErrorSeries, EnergyTrace, Snapshot], path, window: Optional[Tuple[float, float]] = None) -> Path:
    """Write an error series, energy trace or snapshot with 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fmt = Config.CSV_FLOAT_FORMAT
    if isinstance(obj, ErrorSeries):
        s = obj.window(*window) if window is not None else obj
        data = np.column_stack([s.times, s.l2, s.energy]) if len(s) else np.zeros((0, 3))
        np.savetxt(path, data, delimiter=",", fmt=fmt, header="time,l2_error,energy_error", comments="")
    elif isinstance(obj, EnergyTrace):
        data = np.column_stack([obj.steps, obj.values]) if obj.values.size else np.zeros((0, 2))
        np.savetxt(path, data, delimiter=",", fmt=["%d", fmt], header="step,energy", comments="")
    elif isinstance(obj, Snapshot):
        np.savetxt(path, obj.grid, delimiter=",", fmt=fmt, header=f"time={obj.time!r}", comments="# ")
    else:
        raise ArgumentError(f"cannot export {type(obj).__name__} as CSV")
    return path


def to_gray(grid: np.ndarray, scale: Optional[float] = None) -> np.ndarray:
    """Signed field -> uint8, zero mapped to mid gray."""
    scale = float(np.max(np.abs(grid))) if scale is None else scale
    if scale <= 0 or not np.isfinite(scale):
        return np.full(grid.shape, 128, dtype=np.uint8)
    g = 127.5 + 127.5 * np.clip(grid / scale, -1.0, 1.0)
    # row 0 is y = 0; images start at the top
    return np.flipud(np.round(g)).astype(np.uint8)


def export_pgm(snapshot: Snapshot, path, scale: Optional[float] = None, heatmap: bool = False) -> Path:
    """Grayscale raster for quick visual diffs; a JET-colored PNG next to it on request."""
    path = Path(path).with_suffix(".pgm")
    path.parent.mkdir(parents=True, exist_ok=True)
    gray = to_gray(snapshot.grid, scale)
    if not cv2.imwrite(str(path), gray):
        raise DataError(f"could not write raster {path}")
    if heatmap:
        color = cv2.applyColorMap(gray, cv2.COLORMAP_JET)
        cv2.imwrite(str(path.with_suffix(".png")), color)
    logger.info(f"[Export] Snapshot t={snapshot.time:g} -> {path.name}")
    return path
