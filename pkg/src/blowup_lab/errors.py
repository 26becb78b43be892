"""Exception types raised across the package."""

from __future__ import annotations


class BlowupLabError(Exception):
    """Base class for every error the library raises on purpose."""

    code = "error"

    def to_json(self) -> dict:
        return {"error": self.code, "message": str(self)}


class RangeViolation(BlowupLabError):
    """A parameter quadruple falls outside the admissible range."""

    code = "RangeViolation"

    def __init__(self, which: str, message: str):
        super().__init__(message)
        self.which = which

    def to_json(self) -> dict:
        out = super().to_json()
        out["which"] = self.which
        return out


class ChartSingular(BlowupLabError):
    code = "ChartSingular"


class StepUnderflow(BlowupLabError):
    code = "StepUnderflow"


class NonFinite(BlowupLabError):
    code = "NonFinite"


class BracketInvalid(BlowupLabError):
    code = "BracketInvalid"


class EmptyScan(BlowupLabError):
    code = "EmptyScan"


class OffBarrier(BlowupLabError):
    code = "OffBarrier"


class ClosedFormMismatch(BlowupLabError):
    code = "ClosedFormMismatch"


class ReconstructFailed(BlowupLabError):
    code = "ReconstructFailed"


class NoModelFits(BlowupLabError):
    code = "NoModelFits"


class OutOfRange(BlowupLabError):
    code = "OutOfRange"
