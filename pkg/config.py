#!/usr/bin/env python3
"""Configuration: defaults, enums, solver settings and the experiment schema."""

from pathlib import Path
from enum import Enum
from dataclasses import dataclass
from typing import Dict, Any, List, Optional, Tuple
import json
import math
import os

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from errors import ConfigurationError


class Scheme(Enum):
    IMPLICIT = "implicit_26"
    EXPLICIT = "explicit_29"
    WEIGHTED = "weighted_211"
    SPLIT_OMEGA1 = "split_omega1"
    SPLIT_OMEGA0 = "split_omega0"
    SPLIT_LUMPED = "split_lumped"
    IMPLICIT_CEM = "implicit_cem"


class StabilityMode(Enum):
    CFL = "cfl_2_10"
    ORTHO = "ortho_3_4"
    NONORTHO = "nonortho_stab_cond"
    WEIGHTED = "weighted_211"


class V2Choice(Enum):
    CHOICE1 = "choice1"
    CHOICE2 = "choice2"


class WeightKind(Enum):
    COARSE_SCALED = "coarse_scaled"  # kappa * H^-2
    PARTITION_OF_UNITY = "partition_of_unity"  # kappa * sum |grad chi_i|^2


class SweepAxis(Enum):
    CONTRAST = "contrast"
    TAU = "tau"
    J = "J"
    LAYERS = "layers"


class Provenance(Enum):
    CEM = "cem"
    V2_CHOICE1 = "v2_choice1"
    V2_CHOICE2 = "v2_choice2"
    LUMPED_V1 = "lumped_v1"
    LUMPED_V2 = "lumped_v2"


@dataclass
class SolverSettings:
    solve_rtol: float = 1e-10
    eig_tol: float = 1e-8
    tie_rtol: float = 1e-10  # eigenvalues equal to the J-th within this are all kept
    constraint_tol: float = 1e-9
    rank_tol: float = 1e-10  # relative pivot size below which constraint rows count as dependent
    orthogonality_tol: float = 1e-10
    dense_limit: int = 600  # above this size generalized eigenproblems go to ARPACK
    eig_seed: int = 0


class Config:
    BASE_DIR = Path(os.path.dirname(os.path.abspath(__file__)))
    DATA_DIR = BASE_DIR / "data"
    CONFIGS_DIR = BASE_DIR / "configs"
    LOGS_DIR = BASE_DIR / "logs"
    OUTPUT_DIR = Path(os.environ.get("CEMWAVE_OUTPUT_ROOT", BASE_DIR / "output"))
    OUTPUT_ENV = "CEMWAVE_OUTPUT_ROOT"

    # Mesh (H = 1/10, h = 1/100)
    NX_FINE = 100
    NX_COARSE = 10

    # Time stepping
    TAU_COARSE = 0.006
    TAU_REFERENCE = 1e-4
    T_FINAL = 0.6
    SIGMA = 0.25

    # Source
    F0 = 0.5

    # Spaces
    AUX_PER_ELEMENT = 3
    V2_PER_ELEMENT = 3
    OVERSAMPLING_LAYERS = 2
    LUMPING_THRESHOLD = 1.0
    LUMPED_V2_PER_ELEMENT = 5

    # Media
    DEFAULT_CONTRAST = 1e4
    BACKGROUND = 1.0

    # Output
    SNAPSHOT_TIMES: Tuple[float, ...] = (0.3, 0.6)
    ERROR_WINDOW: Tuple[float, float] = (0.2, 0.6)
    CSV_FLOAT_FORMAT = "%.17g"

    solver = SolverSettings()

    CASE_GEOMETRIES: Dict[str, str] = {
        "case1": "case1_channels.json",
        "case2": "case2_channels_inclusions.json",
    }

    @classmethod
    def output_root(cls) -> Path:
        """Output root, re-read from the environment so tests can redirect it."""
        return Path(os.environ.get(cls.OUTPUT_ENV, cls.OUTPUT_DIR))

    @classmethod
    def ensure_dirs(cls):
        for d in [cls.LOGS_DIR, cls.output_root()]:
            d.mkdir(parents=True, exist_ok=True)


# ---------------------------------------------------------------------------
# Experiment schema
# ---------------------------------------------------------------------------

class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", use_enum_values=False)


class MeshSettings(_Strict):
    nx_fine: int = Field(default=Config.NX_FINE, ge=2)
    nx_coarse: int = Field(default=Config.NX_COARSE, ge=1)

    @model_validator(mode="after")
    def _divisible(self):
        if self.nx_fine % self.nx_coarse != 0:
            raise ValueError(f"nx_fine={self.nx_fine} is not divisible by nx_coarse={self.nx_coarse}")
        return self


class MediumSettings(_Strict):
    case: Optional[str] = Field(default="case2", description="case1 | case2 | null")
    geometry_file: Optional[str] = None
    field_file: Optional[str] = None
    contrast: float = Field(default=Config.DEFAULT_CONTRAST, gt=0)
    background: float = Field(default=Config.BACKGROUND, gt=0)

    @field_validator("case")
    @classmethod
    def _known_case(cls, v):
        if v is not None and v not in Config.CASE_GEOMETRIES:
            raise ValueError(f"unknown case '{v}', expected one of {sorted(Config.CASE_GEOMETRIES)}")
        return v


class SourceSettings(_Strict):
    enabled: bool = True
    f0: float = Field(default=Config.F0, gt=0)
    center: Tuple[float, float] = (0.5, 0.5)
    width: int = Field(default=2, ge=1)
    amplitude: Optional[float] = Field(default=None, description="replaces 2 - 2/f0, which vanishes at f0 = 1")


class SpaceSettings(_Strict):
    aux_per_element: int = Field(default=Config.AUX_PER_ELEMENT, ge=1)
    v2_choice: V2Choice = V2Choice.CHOICE2
    v2_count: int = Field(default=Config.V2_PER_ELEMENT, ge=0)
    layers: int = Field(default=Config.OVERSAMPLING_LAYERS, ge=0)
    weight: WeightKind = WeightKind.COARSE_SCALED
    lumping_threshold: float = Config.LUMPING_THRESHOLD
    lumped_v2_count: int = Field(default=Config.LUMPED_V2_PER_ELEMENT, ge=0)
    orthogonalize: bool = False


class SchemeSettings(_Strict):
    scheme: Scheme
    tau: float = Field(default=Config.TAU_COARSE, gt=0)
    sigma: float = Field(default=Config.SIGMA, ge=0)
    omega: float = Field(default=1.0, ge=0, le=1)


class ReferenceSettings(_Strict):
    enabled: bool = True
    tau: float = Field(default=Config.TAU_REFERENCE, gt=0)


class ExperimentConfig(_Strict):
    name: str = "experiment"
    mesh: MeshSettings = Field(default_factory=MeshSettings)
    medium: MediumSettings = Field(default_factory=MediumSettings)
    source: SourceSettings = Field(default_factory=SourceSettings)
    spaces: SpaceSettings = Field(default_factory=SpaceSettings)
    schemes: List[SchemeSettings] = Field(default_factory=list)
    T: float = Field(default=Config.T_FINAL, gt=0)
    reference: ReferenceSettings = Field(default_factory=ReferenceSettings)
    snapshot_times: List[float] = Field(default_factory=lambda: list(Config.SNAPSHOT_TIMES))
    error_window: Tuple[float, float] = Config.ERROR_WINDOW
    output_dir: Optional[str] = None
    seed: int = 0
    workers: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def _cross_checks(self):
        if not self.schemes:
            raise ValueError("scheme list is empty")
        for t in self.snapshot_times:
            if t < 0 or t > self.T + 1e-12:
                raise ValueError(f"snapshot time {t} outside [0, T={self.T}]")
        lo, hi = self.error_window
        if lo > hi:
            raise ValueError(f"error window {self.error_window} is reversed")
        if self.reference.enabled:
            for k, s in enumerate(self.schemes):
                ratio = s.tau / self.reference.tau
                if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio) or round(ratio) < 1:
                    raise ValueError(
                        f"schemes.{k}.tau={s.tau} is not an integer multiple of reference.tau={self.reference.tau}")
        return self


def load_experiment(path) -> ExperimentConfig:
    """Read and validate a JSON experiment file."""
    path = Path(path)
    try:
        with open(path, "r") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"config file {path} is not valid JSON: {e}")
    return parse_experiment(data)


def parse_experiment(data: Dict[str, Any]) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        fields = [".".join(str(p) for p in err["loc"]) or "<root>" for err in e.errors()]
        messages = "; ".join(err["msg"] for err in e.errors())
        raise ConfigurationError(f"invalid experiment config: {messages}", fields=fields)


def steps_for(T: float, tau: float) -> int:
    """N = round(T / tau)."""
    n = int(round(T / tau))
    if n < 1 or not math.isfinite(T / tau):
        raise ConfigurationError(f"T={T} and tau={tau} give no time steps", fields=["T"])
    return n
