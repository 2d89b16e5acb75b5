"""Exception types shared across gcs-planner."""

from __future__ import annotations


class PlannerError(Exception):
    """Base class for every error raised by gcs-planner."""


class ScenarioError(PlannerError, ValueError):
    """A scenario document failed schema or invariant validation."""

    def __init__(self, message: str, *, path: str = "$", check: str | None = None):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
        self.check = check


class GeometryError(PlannerError, ValueError):
    pass


class BezierError(PlannerError, ValueError):
    pass


class DegenerateScalingError(BezierError):
    """The time scaling derivative vanished, so time-domain quantities are undefined."""


class FlatnessError(PlannerError, ValueError):
    pass


class SolverError(PlannerError):
    """The LP backend stopped for a reason other than infeasibility or unboundedness."""


class InfeasibleError(PlannerError):
    """No candidate path admits a feasible program.

    ``diagnostics`` maps a path label to the summed Phase-I residual of each
    constraint family, largest first.
    """

    def __init__(self, message: str, diagnostics: dict[str, dict[str, float]] | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ExtractionError(PlannerError):
    pass


class RoundingError(PlannerError):
    pass


class ResultWriteError(PlannerError, OSError):
    def __init__(self, path, cause: Exception):
        super().__init__(f"Could not write {path}: {cause}")
        self.path = path
