"""Exception hierarchy shared by every module.

Numerical failures carry enough context for the CLI to emit a machine-readable
payload (see :func:`liouville.cli.main`).
"""

__all__ = [
    "LiouvilleError", "ParameterDomainError", "DomainError", "UnsupportedError",
    "UnsupportedClosureError", "NumericalError", "NumericalBlowupError", "SchemeFailureError",
    "ConservationError", "OutOfRangeError", "FitDegenerateError", "ConfigError",
    "SingularForcingWarning", "MassLossWarning",
]


class LiouvilleError(Exception):
    """Base class for all package errors."""

    kind = "error"

    def payload(self):
        return {"error": self.kind, "message": str(self)}


class ParameterDomainError(LiouvilleError, ValueError):
    kind = "parameter_domain"


class DomainError(LiouvilleError, ValueError):
    """Argument outside the domain where a formula is defined (e.g. t <= 0)."""

    kind = "domain"


class UnsupportedError(LiouvilleError, NotImplementedError):
    kind = "unsupported"


class UnsupportedClosureError(UnsupportedError):
    kind = "unsupported_closure"


class NumericalError(LiouvilleError, ArithmeticError):
    kind = "numerical"


class NumericalBlowupError(NumericalError):
    kind = "numerical_blowup"

    def __init__(self, message, time):
        super().__init__(f"{message} (t={time!r})")
        self.time = time

    def payload(self):
        return {**super().payload(), "time": self.time}


class SchemeFailureError(NumericalError):
    kind = "scheme_failure"


class ConservationError(NumericalError):
    kind = "conservation"


class OutOfRangeError(LiouvilleError, ValueError):
    kind = "out_of_range"


class FitDegenerateError(NumericalError):
    kind = "fit_degenerate"


class ConfigError(LiouvilleError, ValueError):
    kind = "usage"


class SingularForcingWarning(RuntimeWarning):
    pass


class MassLossWarning(RuntimeWarning):
    pass
