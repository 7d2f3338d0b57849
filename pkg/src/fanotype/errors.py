"""Domain errors.

Every error carries a JSON-friendly payload so the CLI can report it with
exit code 1 without knowing the concrete type.
"""

from __future__ import annotations


class FanoError(ValueError):
    """Base class for all domain errors raised by this package."""

    def __init__(self, message: str = "", **details):
        super().__init__(message or type(self).__name__)
        self.details = details

    def to_dict(self) -> dict:
        out = {"error": type(self).__name__}
        out.update(self.details)
        msg = str(self)
        if msg and msg != type(self).__name__:
            out["message"] = msg
        return out


class NegativeMass(FanoError):
    pass


class MassSumMismatch(FanoError):
    pass


class UnsortableTail(FanoError):
    pass


class TailNotSummable(FanoError):
    pass


class UnsupportedTail(FanoError):
    pass


class EpsOutOfRange(FanoError):
    pass


class Infeasible(FanoError):
    """The requested error probability lies outside the attainable interval."""

    def __init__(self, eps: float, lo: float, hi: float, message: str = ""):
        super().__init__(
            message or f"eps={float(eps)!r} outside feasible range [{float(lo)!r}, {float(hi)!r}]",
            range=[float(lo), float(hi)],
        )
        self.eps = eps
        self.range = (float(lo), float(hi))


class BadZCardinality(FanoError):
    pass


class KInfinite(FanoError):
    pass


class NonConcavePhi(FanoError):
    pass


class PhiInfinite(FanoError):
    pass


class DeltaOutOfRange(FanoError):
    pass


class NotMajorized(FanoError):
    pass


class NumericalBreakdown(FanoError):
    pass


class ConditionsUnmet(FanoError):
    pass


class YTooSmall(FanoError):
    pass


class ZTooSmall(FanoError):
    pass


class MeshTooLarge(FanoError):
    pass


class BisectionFailure(FanoError):
    pass
