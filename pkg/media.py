#!/usr/bin/env python3
"""High-contrast media (CSV fields, synthetic channel geometries) and the source configuration."""

import json
import logging
import numpy as np
from pathlib import Path
from dataclasses import dataclass, field
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from config import Config
from errors import ConfigurationError, DataError
from grid import TwoLevelMesh
import assembly

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CoefficientField:
    """kappa per fine cell, shape (ny, nx); row j is the j-th row of cells from y = 0."""

    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.size == 0:
            raise DataError(f"coefficient field must be a non-empty 2D grid, got shape {v.shape}")
        bad = np.argwhere(~np.isfinite(v) | (v <= 0))
        if bad.size:
            r, c = (int(x) for x in bad[0])
            raise DataError(f"coefficient must be positive, got {v[r, c]}", cell=(r, c))
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape

    @property
    def contrast(self) -> float:
        return float(self.values.max() / self.values.min())

    def flat(self) -> np.ndarray:
        """Cell-ordered vector matching TwoLevelMesh cell numbering."""
        return self.values.ravel()

    def scaled(self, s: float) -> "CoefficientField":
        if s <= 0:
            raise DataError(f"scale factor must be positive, got {s}")
        return CoefficientField(self.values * s)

    def split(self, threshold: float) -> Tuple[np.ndarray, np.ndarray]:
        """Boolean masks {kappa <= threshold} and {kappa > threshold}; together they cover every cell."""
        low = self.values <= threshold
        return low.ravel(), (~low).ravel()

    def check_mesh(self, mesh: TwoLevelMesh):
        if self.shape != (mesh.ny_fine, mesh.nx_fine):
            raise DataError(f"field shape {self.shape} does not match mesh "
                            f"({mesh.ny_fine} rows x {mesh.nx_fine} columns of cells)")


def load_field(path, expected_shape: Optional[Tuple[int, int]] = None) -> CoefficientField:
    path = Path(path)
    if not path.exists():
        raise DataError(f"field file not found: {path}")
    rows = []
    with open(path, "r") as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                rows.append([float(x) for x in line.split(",")])
            except ValueError as e:
                raise DataError(f"{path}: unparsable value on data row {len(rows)}: {e}")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise DataError(f"{path}: rows have differing lengths {sorted(widths)}")
    values = np.array(rows)
    if expected_shape is not None and values.shape != tuple(expected_shape):
        raise DataError(f"{path}: expected shape {tuple(expected_shape)}, got {values.shape}")
    kappa = CoefficientField(values)
    logger.info(f"[Media] Loaded {path.name}: {values.shape[0]}x{values.shape[1]} cells, contrast {kappa.contrast:.3g}")
    return kappa


def save_field(kappa: CoefficientField, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, kappa.values, delimiter=",", fmt=Config.CSV_FLOAT_FORMAT)


# ---------------------------------------------------------------------------
# Synthetic channel / inclusion geometries
# ---------------------------------------------------------------------------

class GeometryEntry(BaseModel):
    """One rectangle in unit coordinates. Strips default to the full width or height."""

    model_config = ConfigDict(extra="forbid")

    kind: Literal["block", "hstrip", "vstrip"] = "block"
    x0: float = 0.0
    x1: float = 1.0
    y0: float = 0.0
    y1: float = 1.0
    value: Optional[float] = Field(default=None, gt=0, description="absolute kappa; default background*contrast")

    @model_validator(mode="after")
    def _inside_domain(self):
        for name in ("x0", "x1", "y0", "y1"):
            v = getattr(self, name)
            if v < 0.0 or v > 1.0:
                raise ValueError(f"{name}={v} lies outside the unit square")
        if self.x0 >= self.x1 or self.y0 >= self.y1:
            raise ValueError(f"empty rectangle [{self.x0},{self.x1}]x[{self.y0},{self.y1}]")
        return self


class Geometry(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = "geometry"
    background: float = Field(default=Config.BACKGROUND, gt=0)
    contrast: float = Field(default=Config.DEFAULT_CONTRAST, gt=0)
    entries: List[GeometryEntry] = Field(default_factory=list)


def load_geometry(path) -> Geometry:
    path = Path(path)
    try:
        with open(path, "r") as f:
            return Geometry.model_validate(json.load(f))
    except FileNotFoundError:
        raise DataError(f"geometry file not found: {path}")
    except json.JSONDecodeError as e:
        raise DataError(f"geometry file {path} is not valid JSON: {e}")
    except ValidationError as e:
        raise DataError(f"geometry file {path}: {e.errors()[0]['msg']}")


def synth_channels(entries, background: float, contrast: float, nx: int, ny: Optional[int] = None) -> CoefficientField:
    """Rasterize rectangles onto an nx-by-ny cell grid; a cell belongs to a rectangle
    when its center does. Later entries overwrite earlier ones."""
    ny = ny or nx
    try:
        entries = [e if isinstance(e, GeometryEntry) else GeometryEntry.model_validate(e) for e in entries]
    except ValidationError as e:
        raise DataError(f"geometry entry rejected: {e.errors()[0]['msg']}")
    if background <= 0 or contrast <= 0:
        raise DataError(f"background and contrast must be positive, got {background}, {contrast}")
    xc = (np.arange(nx) + 0.5) / nx
    yc = (np.arange(ny) + 0.5) / ny
    X, Y = np.meshgrid(xc, yc)
    values = np.full((ny, nx), float(background))
    for e in entries:
        mask = (X >= e.x0) & (X <= e.x1) & (Y >= e.y0) & (Y <= e.y1)
        values[mask] = e.value if e.value is not None else background * contrast
    return CoefficientField(values)


def case_field(case: str, nx: int, contrast: Optional[float] = None, background: Optional[float] = None) -> CoefficientField:
    """One of the shipped media (data/*.json), rasterized at resolution nx."""
    if case not in Config.CASE_GEOMETRIES:
        raise ConfigurationError(f"unknown medium case '{case}'", fields=["medium.case"])
    geo = load_geometry(Config.DATA_DIR / Config.CASE_GEOMETRIES[case])
    return synth_channels(geo.entries,
                          geo.background if background is None else background,
                          geo.contrast if contrast is None else contrast, nx)


# ---------------------------------------------------------------------------
# Source
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SourceConfig:
    """f(t, x) = amplitude(f0, h) * envelope(t) * f_x(x) with f_x the indicator of a
    `width`-by-`width` block of fine cells around `center`."""

    f0: float = Config.F0
    center: Tuple[float, float] = (0.5, 0.5)
    width: int = 2
    amplitude: Optional[float] = None

    def __post_init__(self):
        if self.f0 <= 0:
            raise ConfigurationError(f"source frequency must be positive, got {self.f0}", fields=["source.f0"])
        if self.width < 1:
            raise ConfigurationError(f"source width must be >= 1 cell, got {self.width}", fields=["source.width"])

    def profile(self, mesh: TwoLevelMesh) -> np.ndarray:
        """f_x per fine cell."""
        i0 = int(round(self.center[0] * mesh.nx_fine)) - self.width // 2
        j0 = int(round(self.center[1] * mesh.ny_fine)) - self.width // 2
        i0 = min(max(i0, 0), mesh.nx_fine - self.width)
        j0 = min(max(j0, 0), mesh.ny_fine - self.width)
        out = np.zeros((mesh.ny_fine, mesh.nx_fine))
        out[j0:j0 + self.width, i0:i0 + self.width] = 1.0
        return out.ravel()

    def spatial_load(self, mesh: TwoLevelMesh) -> np.ndarray:
        """amplitude * int f_x phi_j, to be multiplied by the envelope at each step."""
        return assembly.source_amplitude(self.f0, mesh.h, self.amplitude) * assembly.load_vector(mesh, self.profile(mesh))

    def envelope(self, t: float) -> float:
        return assembly.source_time_factor(t, self.f0)
