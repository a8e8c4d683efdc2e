"""
Exception hierarchy for cohomolib.

All errors derive from ValueError so callers that only expect ValueError keep working.
Grouping classes decide the CLI exit code.
"""

from typing import Any, Dict, Optional


class CohomologyError(ValueError):
    """Base error carrying optional structured context"""

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.context: Dict[str, Any] = context

    def to_dict(self) -> Dict[str, Any]:
        """Error as a JSON-friendly dict"""
        return {
            "error": self.__class__.__name__,
            "message": str(self),
            "context": {k: _plain(v) for k, v in self.context.items()},
        }


class AssertionClassError(CohomologyError):
    """A numerical check failed beyond its declared tolerance (exit code 2)"""


class BudgetClassError(CohomologyError):
    """A compute budget was hit before the requested result was reached (exit code 3)"""


# arithmetic
class PrecisionExhausted(CohomologyError):
    pass


class RationalInput(CohomologyError):
    pass


class InvalidQuotient(CohomologyError):
    pass


# calculus
class IndexOutOfRange(CohomologyError):
    pass


class LengthMismatch(CohomologyError):
    pass


class NonpositiveDerivative(CohomologyError):
    pass


# circlemap
class NotADiffeomorphism(CohomologyError):
    pass


class NewtonDivergence(AssertionClassError):
    pass


class PeriodicOrbitDetected(CohomologyError):
    pass


class MaxIterExceeded(CohomologyError):
    def __init__(self, message: str, best: Optional[float] = None, **context: Any):
        super().__init__(message, best=best, **context)
        self.best = best


class TargetInPlateau(CohomologyError):
    pass


class BudgetExceeded(BudgetClassError):
    pass


class RationalRotation(CohomologyError):
    pass


class PartitionViolation(AssertionClassError):
    pass


class RotationMismatch(AssertionClassError):
    """The map's rotation number does not share the continued fraction's quotients"""


class DerivativeUnavailable(CohomologyError):
    pass


# cocycle
class OrderUnavailable(CohomologyError):
    pass


class BoundViolated(AssertionClassError):
    pass


class DegenerateBetas(CohomologyError):
    pass


# fourier
class DivisorUnderflow(CohomologyError):
    pass


class NotLiouvilleEnough(CohomologyError):
    pass


# action
class NonPeriodicConjugator(CohomologyError):
    pass


class NotUnimodular(CohomologyError):
    pass


class FixedPointInWindow(CohomologyError):
    pass


# coboundary
class DegenerateInterval(CohomologyError):
    pass


class PeriodicityViolated(AssertionClassError):
    pass


class NoQualifyingLevel(BudgetClassError):
    pass


class CertificateFailed(AssertionClassError):
    def __init__(self, message: str, clause: str = "", **context: Any):
        super().__init__(message, clause=clause, **context)
        self.clause = clause


class ResidualTooLarge(AssertionClassError):
    pass


# cli
class ConfigParse(CohomologyError):
    pass


EXIT_OK = 0
EXIT_ASSERTION = 2
EXIT_BUDGET = 3
EXIT_CONFIG = 4


def exit_code_for(error: BaseException) -> int:
    """Map an exception onto the CLI exit code"""
    if isinstance(error, ConfigParse):
        return EXIT_CONFIG
    if isinstance(error, BudgetClassError):
        return EXIT_BUDGET
    return EXIT_ASSERTION


def _plain(value: Any) -> Any:
    if isinstance(value, (int, float, str, bool)) or value is None:
        return value
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if hasattr(value, "model_dump"):
        return _plain(value.model_dump(mode="json"))
    return str(value)
