"""
BIPHASE Errors
==============

Exception hierarchy shared by the numerical core, the scenario layer and the CLI.
The CLI maps these onto process exit codes.
"""

from typing import Any, Optional


class BiphaseError(Exception):
    """Base class for all BIPHASE errors."""

    exit_code: int = 1


class DomainError(BiphaseError, ValueError):
    """An argument lies outside the domain of a model function."""


class GeometryError(BiphaseError):
    """A moving-mesh cell would get a nonpositive width."""


class CFLError(BiphaseError):
    """The interface moved by more than half a cell in one step."""


class NewtonError(BiphaseError):
    """Newton iteration failed to converge or hit a singular system."""

    exit_code = 3

    def __init__(self, message: str, iterations: int = 0):
        super().__init__(message)
        self.iterations = iterations


class SingularSystemError(NewtonError):
    """A Stefan-Maxwell edge system could not be inverted."""


class StationaryError(BiphaseError):
    """Root solve for a two-phase stationary state did not converge."""


class SolverFailure(BiphaseError):
    """Time stepping gave up after exhausting its step-size halvings."""

    exit_code = 3

    def __init__(self, message: str, t: float = 0.0, dump_path: Optional[str] = None,
                 state: Any = None):
        super().__init__(message)
        self.t = t
        self.dump_path = dump_path
        self.state = state


class InvariantBreach(BiphaseError):
    """A structural invariant was violated while running in strict mode."""

    exit_code = 4

    def __init__(self, message: str, t: float = 0.0, check: str = ""):
        super().__init__(message)
        self.t = t
        self.check = check


class ScenarioError(BiphaseError):
    """Scenario configuration is missing, malformed or invalid."""

    exit_code = 2

    def __init__(self, message: str, line: Optional[int] = None, source: Optional[str] = None):
        self.line = line
        self.source = source
        location = ""
        if source is not None and line is not None:
            location = f"{source}:{line}: "
        elif source is not None:
            location = f"{source}: "
        elif line is not None:
            location = f"line {line}: "
        super().__init__(f"{location}{message}")


class GridError(BiphaseError, ValueError):
    """Two runs cannot be compared on a common grid."""
