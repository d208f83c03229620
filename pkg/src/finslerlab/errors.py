"""Exception hierarchy.  Every error carries a machine-readable code and context."""

from __future__ import annotations


class FinslerError(Exception):
    code = "FINSLER_ERROR"
    #: "input" errors map to CLI exit code 2, "numerical" ones to 3
    kind = "numerical"

    def __init__(self, message: str, **context):
        super().__init__(message)
        self.message = message
        self.context = context

    def to_dict(self) -> dict:
        return {"code": self.code, "message": self.message, "context": _plain(self.context)}


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if hasattr(obj, "tolist"):
        return obj.tolist()
    if isinstance(obj, (int, float, str, bool)) or obj is None:
        return obj
    return str(obj)


class InputError(FinslerError):
    code = "INPUT_ERROR"
    kind = "input"


class ConfigError(InputError):
    code = "CONFIG_ERROR"


class InvalidParameter(InputError):
    code = "INVALID_PARAMETER"


class NavigationDegenerate(InputError):
    code = "NAVIGATION_DEGENERATE"


class DomainError(InputError):
    code = "DOMAIN_ERROR"


class ZeroVector(InputError):
    code = "ZERO_VECTOR"


class ZeroCovector(InputError):
    code = "ZERO_COVECTOR"


class DegenerateFlag(InputError):
    code = "DEGENERATE_FLAG"


class CriticalPoint(InputError):
    code = "CRITICAL_POINT"


class NotPositiveDefinite(FinslerError):
    code = "NOT_POSITIVE_DEFINITE"


class ConvergenceFailure(FinslerError):
    code = "CONVERGENCE_FAILURE"


class QuadratureNotConverged(FinslerError):
    code = "QUADRATURE_NOT_CONVERGED"


class StepSizeUnderflow(FinslerError):
    code = "STEP_SIZE_UNDERFLOW"


class FocalPoint(FinslerError):
    code = "FOCAL_POINT"


class InsufficientSamples(FinslerError):
    code = "INSUFFICIENT_SAMPLES"


class IsotropyViolation(FinslerError):
    code = "ISOTROPY_VIOLATION"


class SpecializationMismatch(FinslerError):
    code = "SPECIALIZATION_MISMATCH"


class MethodMismatch(FinslerError):
    code = "METHOD_MISMATCH"
