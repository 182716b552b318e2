"""
Error types

Every failure the engine can report is an AllocationError carrying a
``details`` dict, so callers (CLI, services) can render a structured error.
"""

from typing import Any, Dict, Optional


class AllocationError(ValueError):
    """Base error with a structured payload."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details: Dict[str, Any] = details or {}

    def to_dict(self) -> Dict[str, Any]:
        return {
            "error": type(self).__name__,
            "detail": self.message,
            "details": self.details,
        }


class DimensionMismatchError(AllocationError):
    """Vectors sized for a different number of regions."""


class InvalidDecisionError(AllocationError):
    """A placement decision violates a structural constraint."""


class InfeasibleError(AllocationError):
    """No serving assignment meets the delay threshold."""

    def __init__(self, min_delay_ms: float, threshold_ms: float):
        super().__init__(
            f"Delay threshold {threshold_ms} ms is below the minimum "
            f"achievable average delay {min_delay_ms:.6f} ms",
            {"min_delay_ms": min_delay_ms, "threshold_ms": threshold_ms},
        )
        self.min_delay_ms = min_delay_ms
        self.threshold_ms = threshold_ms


class InstanceTooLargeError(AllocationError):
    """Instance exceeds the brute-force enumeration bound."""


class EmptyRegionSetError(AllocationError):
    """Operation needs at least one region."""


class HashDimensionError(AllocationError):
    """Hash dimension is not a power of two >= 2."""


class EmptyTrainingSetError(AllocationError):
    """Model fitting called without samples."""


class ZeroVarianceError(AllocationError):
    """R² is undefined because the actual values are all identical."""


class FeatureWidthError(AllocationError):
    """Feature vector width does not match the trained model."""


class TraceFormatError(AllocationError):
    """Malformed trace file."""

    def __init__(self, message: str, row: Optional[int] = None, **details: Any):
        payload = dict(details)
        if row is not None:
            payload["row"] = row
            message = f"Row {row}: {message}"
        super().__init__(message, payload)
        self.row = row


class SimulationError(AllocationError):
    """Simulator precondition violated."""
