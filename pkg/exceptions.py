"""
Quench - Custom Exception Hierarchy
Domain-specific exceptions for grid ingestion, network analysis, optimization and reporting.
"""

from __future__ import annotations

from typing import Any, Iterable


class QuenchError(Exception):
    """
    Base exception for all Quench errors.

    Carries a human-readable message plus a details mapping that is
    rendered as ``key=value`` pairs.
    """

    def __init__(
        self,
        message: str,
        *,
        details: dict[str, Any] | None = None,
        cause: Exception | None = None,
    ) -> None:
        super().__init__(message)
        self.message = message
        self.details = details or {}
        self.cause = cause

    def __str__(self) -> str:
        if self.details:
            details_str = ", ".join(f"{k}={v}" for k, v in self.details.items())
            return f"{self.message} ({details_str})"
        return self.message


# =============================================================================
# Grid Errors
# =============================================================================

class GridError(QuenchError):
    """Errors from grid ingestion and validation."""

    def __init__(
        self,
        message: str,
        location: str | None = None,
        **kwargs: Any,
    ) -> None:
        super().__init__(message, **kwargs)
        self.location = location
        if location:
            self.details["location"] = location


class GridParseError(GridError):
    """Raised when a grid document cannot be read or does not match the schema."""
    pass


class GridValidationError(GridError):
    """Raised when a parsed grid violates a network invariant."""
    pass


class UnknownBusError(GridError):
    """Raised when a bus id is referenced but never declared."""

    def __init__(self, bus_id: int, **kwargs: Any) -> None:
        super().__init__(f"unknown bus {bus_id}", **kwargs)
        self.bus_id = bus_id
        self.details["bus"] = bus_id


class UnknownBranchError(GridError):
    """Raised when a branch id is not part of the network."""

    def __init__(self, branch_id: int, **kwargs: Any) -> None:
        super().__init__(f"unknown branch {branch_id}", **kwargs)
        self.branch_id = branch_id
        self.details["branch"] = branch_id


# =============================================================================
# Topology Errors
# =============================================================================

class TopologyError(QuenchError):
    """Errors about the switch state of a network."""
    pass


class NonRadialConfigError(TopologyError):
    """Raised when an operation requires a radial configuration."""

    def __init__(self, open_branches: Iterable[int], **kwargs: Any) -> None:
        opened = sorted(open_branches)
        super().__init__("switch configuration is not radial", **kwargs)
        self.open_branches = opened
        self.details["open"] = opened


class FaultBusDisconnectedError(TopologyError):
    """Raised when a fault bus is not energized in the configuration."""

    def __init__(self, bus_id: int, **kwargs: Any) -> None:
        super().__init__(f"fault bus {bus_id} is not connected", **kwargs)
        self.bus_id = bus_id
        self.details["bus"] = bus_id


# =============================================================================
# Power Flow Errors
# =============================================================================

class PowerFlowError(QuenchError):
    """Base error for steady-state analysis."""
    pass


class ConvergenceError(PowerFlowError):
    """Raised when a solution that did not converge is used as if it had."""

    def __init__(self, iterations: int, worst_mismatch: float, **kwargs: Any) -> None:
        super().__init__(
            f"power flow did not converge after {iterations} sweeps",
            **kwargs,
        )
        self.iterations = iterations
        self.worst_mismatch = worst_mismatch
        self.details["worst_mismatch"] = f"{worst_mismatch:.3e}"


class MissingLevelSolutionError(PowerFlowError):
    """Raised when a cost evaluation lacks the solution of a load level."""

    def __init__(self, level: int, **kwargs: Any) -> None:
        super().__init__(f"no power flow solution for load level {level}", **kwargs)
        self.level = level
        self.details["level"] = level


# =============================================================================
# Fault Analysis Errors
# =============================================================================

class FaultAnalysisError(QuenchError):
    """Base error for short-circuit studies."""
    pass


class SfclOnOpenBranchError(FaultAnalysisError):
    """Raised when a limiter sits on a branch that the configuration opens."""

    def __init__(self, branch_id: int, **kwargs: Any) -> None:
        super().__init__(f"SFCL on open branch {branch_id}", **kwargs)
        self.branch_id = branch_id
        self.details["branch"] = branch_id


# =============================================================================
# Optimization Errors
# =============================================================================

class OptimizationError(QuenchError):
    """Raised when the objective fails inside the optimizer loop."""

    def __init__(
        self,
        message: str,
        iteration: int | None = None,
        **kwargs: Any,
    ) -> None:
        super().__init__(message, **kwargs)
        self.iteration = iteration
        if iteration is not None:
            self.details["iteration"] = iteration


# =============================================================================
# Placement Errors
# =============================================================================

class PlacementError(QuenchError):
    """Base error for limiter placement."""
    pass


class InfeasiblePlacementError(PlacementError):
    """Raised when no admissible limiter plan keeps every breaker within rating."""

    def __init__(
        self,
        message: str = "no feasible SFCL placement",
        residuals: dict[int, float] | None = None,
        **kwargs: Any,
    ) -> None:
        super().__init__(message, **kwargs)
        self.residuals = dict(residuals or {})
        if self.residuals:
            self.details["residuals"] = {k: round(v, 1) for k, v in sorted(self.residuals.items())}


class UnusableCandidateError(PlacementError):
    """Raised when a candidate branch carries no closed path in the configuration."""

    def __init__(self, branch_id: int, **kwargs: Any) -> None:
        super().__init__(f"candidate branch {branch_id} is open in this configuration", **kwargs)
        self.branch_id = branch_id
        self.details["branch"] = branch_id


# =============================================================================
# Configuration Errors
# =============================================================================

class ConfigError(QuenchError):
    """Configuration-related errors."""

    def __init__(
        self,
        message: str,
        config_key: str | None = None,
        **kwargs: Any,
    ) -> None:
        super().__init__(message, **kwargs)
        self.config_key = config_key
        if config_key:
            self.details["config_key"] = config_key


class ConfigValidationError(ConfigError):
    """Raised when configuration validation fails."""
    pass


class MissingConfigError(ConfigError):
    """Raised when required configuration is missing."""

    def __init__(self, config_key: str, **kwargs: Any) -> None:
        super().__init__(
            f"Required configuration missing: {config_key}",
            config_key=config_key,
            **kwargs,
        )


# =============================================================================
# Report and Pipeline Errors
# =============================================================================

class ReportError(QuenchError):
    """I/O failures while writing or reading reports."""

    def __init__(
        self,
        message: str,
        path: str | None = None,
        **kwargs: Any,
    ) -> None:
        super().__init__(message, **kwargs)
        self.path = path
        if path:
            self.details["path"] = path


class PipelineStageError(QuenchError):
    """Wraps a failure with the pipeline stage it happened in."""

    def __init__(self, stage: str, reason: str, partial: Any = None, **kwargs: Any) -> None:
        super().__init__(f"stage '{stage}' failed: {reason}", **kwargs)
        self.stage = stage
        self.partial = partial  # RunReport assembled before the failure
        self.details["stage"] = stage


# =============================================================================
# Exports
# =============================================================================

__all__ = [
    # Base
    "QuenchError",
    # Grid
    "GridError",
    "GridParseError",
    "GridValidationError",
    "UnknownBusError",
    "UnknownBranchError",
    # Topology
    "TopologyError",
    "NonRadialConfigError",
    "FaultBusDisconnectedError",
    # Power flow
    "PowerFlowError",
    "ConvergenceError",
    "MissingLevelSolutionError",
    # Faults
    "FaultAnalysisError",
    "SfclOnOpenBranchError",
    # Optimization
    "OptimizationError",
    # Placement
    "PlacementError",
    "InfeasiblePlacementError",
    "UnusableCandidateError",
    # Config
    "ConfigError",
    "ConfigValidationError",
    "MissingConfigError",
    # Reports
    "ReportError",
    "PipelineStageError",
]
