"""Exception hierarchy shared across the package."""


class CovfnError(Exception):
    """Base class for all errors raised by this package."""


class EigFailure(CovfnError):
    """Eigendecomposition did not converge."""


class DomainError(CovfnError):
    """An eigenvalue (or scalar argument) lies outside the function's domain."""


class DimMismatch(CovfnError):
    """Operands have incompatible dimensions."""


class NotPSD(CovfnError):
    """Matrix has negative eigenvalues beyond tolerance."""


class ZeroMatrix(CovfnError):
    """Operation undefined for the zero matrix."""


class BadAlpha(CovfnError):
    """Confidence level outside (0, 1)."""


class ChainFailure(CovfnError):
    """Too many bootstrap-chain replicates left the function's domain."""


class ParseError(CovfnError):
    """A cell of an input file failed to parse.

    Carries 1-based (line, column) location.
    """

    def __init__(self, line, column, message):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class RaggedRows(CovfnError):
    """CSV rows have inconsistent column counts."""

    def __init__(self, line, expected, got):
        super().__init__(
            f"line {line}: expected {expected} columns, got {got}"
        )
        self.line = line


class IoError(CovfnError):
    """File could not be read."""


class UsageError(CovfnError):
    """Bad command line or config file."""
