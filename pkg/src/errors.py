"""Exception hierarchy shared by every module of the laboratory."""
from __future__ import annotations

from typing import Any, Dict, Optional

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


class MinkowskiLabError(Exception):
    """Base class; carries structured context for diagnostic output."""

    exit_code = EXIT_NUMERICAL

    def __init__(self, message: str, **context: Any) -> None:
        super().__init__(message)
        self.message = message
        self.context: Dict[str, Any] = context

    def to_dict(self) -> Dict[str, Any]:
        payload: Dict[str, Any] = {"error": type(self).__name__, "message": self.message}
        payload.update({key: _plain(value) for key, value in self.context.items()})
        return payload


class ConfigValidationError(MinkowskiLabError):
    exit_code = EXIT_VALIDATION


class CurvatureDomainError(MinkowskiLabError, ValueError):
    """Raised when φ or φ′ is evaluated outside ]−1, 1[."""


class NumericalFailure(MinkowskiLabError):
    exit_code = EXIT_NUMERICAL


class StepSizeUnderflow(NumericalFailure):
    def __init__(self, message: str, *, time_reached: float, **context: Any) -> None:
        super().__init__(message, time_reached=time_reached, **context)
        self.time_reached = time_reached


class NoConvergence(NumericalFailure):
    pass


class SingularJacobian(NumericalFailure):
    pass


class CorrectorDivergence(NumericalFailure):
    pass


class BranchLost(NumericalFailure):
    def __init__(self, message: str, *, lam: float, **context: Any) -> None:
        super().__init__(message, lam=lam, **context)
        self.lam = lam


class BracketFailure(NumericalFailure):
    pass


class NotFound(NumericalFailure):
    pass


class TangentialZero(NumericalFailure):
    pass


class DegreeUndefined(NumericalFailure):
    pass


class NoAdmissibleRho(NumericalFailure):
    pass


class DecompositionFailure(NumericalFailure):
    pass


class TrivialOrbit(NumericalFailure):
    pass


class InvariantViolation(NumericalFailure):
    pass


class PreconditionError(NumericalFailure):
    pass


class VerificationFailed(NumericalFailure):
    def __init__(self, message: str, *, item: int, record: Optional[Any] = None, **context: Any) -> None:
        super().__init__(message, item=item, **context)
        self.item = item
        self.record = record


def _plain(value: Any) -> Any:
    """Convert numpy scalars and tuples so the context is JSON serialisable."""
    if hasattr(value, "tolist"):
        return value.tolist()
    if isinstance(value, tuple):
        return [_plain(item) for item in value]
    return value
