"""Exception hierarchy shared across the package.

Every error carries a short stable ``code`` used by the command line
interface to emit machine-parseable ``ERROR <code>: <message>`` lines.
"""

from __future__ import annotations


class BseError(Exception):
    """Base class for all package errors."""

    code = "Error"


class NotPsdError(BseError):
    """A matrix required to be positive semidefinite is not."""

    code = "NotPSD"


class NotPdError(BseError):
    """A matrix required to be positive definite is not."""

    code = "NotPD"


class RankExceededError(BseError):
    """A factorization hit its rank cap before reaching the tolerance."""

    code = "RankExceeded"


class ConvergenceError(BseError):
    """An iterative or dense solver failed to converge to tolerance."""

    code = "ConvergenceFailure"


class SingularCoreError(BseError):
    """The screening core system I + M could not be solved reliably."""

    code = "SingularCore"


class RankMismatchError(BseError):
    """Factors that must share a rank do not."""

    code = "RankMismatch"


class SizeGuardError(BseError):
    """A dense code path was requested above its size guard."""

    code = "SizeGuard"


class GapNotPositiveError(BseError):
    """The smallest orbital-energy difference is not positive."""

    code = "GapNotPositive"

    def __init__(self, delta: float):
        self.delta = float(delta)
        super().__init__(f"smallest orbital-energy difference is {self.delta:.6e}")


class DimensionMismatchError(BseError):
    """Operands have inconsistent dimensions."""

    code = "DimensionMismatch"


class ComplexSpectrumError(BseError):
    """Eigenvalues have imaginary parts beyond tolerance."""

    code = "ComplexSpectrum"


class RankDeficientBasisError(BseError):
    """A projection basis is numerically rank deficient."""

    code = "RankDeficientBasis"


class ComplexRitzError(BseError):
    """Ritz values of the projected problem are complex beyond tolerance."""

    code = "ComplexRitzValue"


class LengthMismatchError(BseError):
    """Spectra passed to a report do not fit together."""

    code = "LengthMismatch"


class ParseError(BseError):
    """A bundle file is malformed; the message names line and field."""

    code = "ParseError"

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(BseError):
    """A parsed or constructed model violates a named invariant."""

    code = "ValidationError"

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class InvalidParamsError(BseError):
    """Generator or solver parameters are out of range."""

    code = "InvalidParams"
