"""Exception hierarchy.

``ValidationError`` subclasses signal malformed input (CLI exit code 2);
``NumericalError`` subclasses signal numerical failure (exit code 3).
"""


class BnmError(Exception):
    """Base class for all package errors."""


class ValidationError(BnmError, ValueError):
    pass


class NegativeEntry(ValidationError):
    pass


class RowSumViolation(ValidationError):
    pass


class EmptyMatrix(ValidationError):
    pass


class EmptyList(ValidationError):
    pass


class ColumnMismatch(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class NonFiniteInput(ValidationError):
    pass


class MatrixFormatError(ValidationError):
    """Malformed matrix text file; ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InvalidD(ValidationError):
    pass


class ZeroGroundTruth(ValidationError):
    pass


class DegenerateConfig(ValidationError, UserWarning):
    """Issued as a warning: the configuration is usable but poorly separated."""


class NumericalError(BnmError, ArithmeticError):
    pass


class ConvergenceFailure(NumericalError):
    pass


class ZeroEntry(NumericalError):
    pass


class ZeroColumnSelected(NumericalError):
    pass


class ZeroProbabilityAtLabel(NumericalError):
    pass


class NumericalOverflow(NumericalError):
    pass


class NonFiniteLoss(NumericalError):
    def __init__(self, step, value):
        self.step = step
        self.value = value
        super().__init__(f"non-finite loss {value!r} at step {step}")


class InsufficientData(BnmError, ValueError):
    pass
