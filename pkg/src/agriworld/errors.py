"""Exception hierarchy.

Every error raised by a tool carries a machine-readable diagnostic code plus
``path``/``observed``/``expected`` fields so the reflection rules can act on it
without parsing messages.
"""

from __future__ import annotations

from typing import Any


class AgroError(Exception):
    code = "AgroError"

    def __init__(
        self,
        message: str,
        *,
        path: str = "",
        observed: Any = None,
        expected: Any = None,
        **details: Any,
    ) -> None:
        super().__init__(message)
        self.message = message
        self.path = path
        self.observed = observed
        self.expected = expected
        self.details = details

    def to_diagnostic(self) -> dict[str, Any]:
        diag = {
            "code": self.code,
            "message": self.message,
            "path": self.path,
            "observed": self.observed,
            "expected": self.expected,
        }
        if self.details:
            diag["details"] = self.details
        return diag


# -- bundle / model ---------------------------------------------------------


class BundleFormatError(AgroError):
    code = "BundleFormatError"


class InvariantError(AgroError):
    code = "InvariantError"


class IoError(AgroError):
    code = "IoError"


# -- units / alignment ------------------------------------------------------


class DimensionMismatch(AgroError):
    # Consumed by reflection under the UnitError code.
    code = "UnitError"


class UnknownUnit(AgroError):
    code = "UnitError"


class OutOfDomain(AgroError):
    code = "OutOfDomain"


class ExtrapolationError(AgroError):
    code = "TemporalWindowError"


class EmptySeries(AgroError):
    code = "EmptySeries"


class SpatialMisalignment(AgroError):
    code = "SpatialMisalignment"


# -- toolkit ----------------------------------------------------------------


class UnknownRegion(AgroError):
    code = "UnknownRegion"


class UnknownParcel(AgroError):
    code = "UnknownParcel"


class UnknownBand(AgroError):
    code = "UnknownBand"


class TemporalWindowError(AgroError):
    code = "TemporalWindowError"


class LowCoverageError(AgroError):
    code = "LowCoverage"


class EmptyZone(AgroError):
    code = "EmptyZone"


class EmptyBaseline(AgroError):
    code = "EmptyBaseline"


class UnknownTool(AgroError):
    code = "UnknownTool"


class ArgumentError(AgroError):
    code = "ArgumentError"


# -- protocol / agent / bench -----------------------------------------------


class ZeroMeanNormalization(AgroError):
    code = "ZeroMeanNormalization"


class GridMismatch(AgroError):
    code = "GridMismatch"


class PlanError(AgroError):
    code = "PlanError"


class TransportError(AgroError):
    code = "TransportError"


class ParseError(AgroError):
    code = "ParseError"


class ReflectionError(AgroError):
    code = "ReflectionError"


class GenerationExhausted(AgroError):
    code = "GenerationExhausted"


class UnknownVariant(AgroError):
    code = "UnknownVariant"
