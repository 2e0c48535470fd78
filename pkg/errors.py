#!/usr/bin/env python3
"""Error types shared by every module; the CLI maps them to exit codes."""

from typing import List, Optional


EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INSTABILITY = 3
EXIT_SOLVER = 4


class WaveSolverError(Exception):
    """Base class. `exit_code` is what the CLI returns for it."""

    exit_code = 1


class ConfigurationError(WaveSolverError):
    """Invalid experiment configuration or mesh parameters."""

    exit_code = EXIT_CONFIG

    def __init__(self, message: str, fields: Optional[List[str]] = None):
        self.fields = list(fields or [])
        if self.fields:
            message = f"{message} (fields: {', '.join(self.fields)})"
        super().__init__(message)


class DataError(WaveSolverError):
    """Malformed coefficient data (wrong shape, nonpositive entries)."""

    exit_code = EXIT_CONFIG

    def __init__(self, message: str, cell: Optional[tuple] = None):
        self.cell = cell
        if cell is not None:
            message = f"{message} at cell {cell}"
        super().__init__(message)


class ArgumentError(WaveSolverError):
    """A request that cannot be served, e.g. more eigenpairs than the dimension."""

    exit_code = EXIT_CONFIG


class PreconditionError(WaveSolverError):
    """Inputs violate a documented hypothesis (e.g. non-orthogonal spaces)."""

    exit_code = EXIT_CONFIG


class SolverError(WaveSolverError):
    """Linear solve or eigensolve failed."""

    exit_code = EXIT_SOLVER

    def __init__(self, message: str, residual: Optional[float] = None):
        self.residual = residual
        if residual is not None:
            message = f"{message} (relative residual {residual:.3e})"
        super().__init__(message)


class DegeneracyError(SolverError):
    """Constraint rows of a saddle-point problem are linearly dependent."""

    def __init__(self, message: str, offending: Optional[str] = None):
        self.offending = offending
        if offending is not None:
            message = f"{message}: {offending}"
        super().__init__(message)


class InstabilityError(WaveSolverError):
    """Non-finite values appeared during time marching."""

    exit_code = EXIT_INSTABILITY

    def __init__(self, message: str, step: Optional[int] = None):
        self.step = step
        if step is not None:
            message = f"{message} at step {step}"
        super().__init__(message)
