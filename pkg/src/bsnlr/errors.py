"""Exception hierarchy shared by the library and the CLI.

A ``row`` attribute is a 0-based index; messages print it 1-based.
"""


class BSError(Exception):
    """Base class for all errors raised by bsnlr."""


class ModelSyntaxError(BSError):
    """Lexical or grammatical error in a mean-function expression."""

    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)


class EvaluationError(BSError):
    """Domain violation while evaluating a mean function."""

    def __init__(self, message: str, offset: int | None = None, row: int | None = None):
        self.offset = offset
        self.row = row
        parts = [message]
        if offset is not None:
            parts.append(f"expression offset {offset}")
        if row is not None:
            parts.append(f"row {row + 1}")
        super().__init__("; ".join(parts))


class SingularDesignError(BSError):
    def __init__(self, message: str, column: int | None = None):
        self.column = column
        super().__init__(message)


class NotPositiveDefiniteError(BSError):
    def __init__(self, message: str, pivot: int | None = None):
        self.pivot = pivot
        super().__init__(message)


class NotLocalMaximumError(BSError):
    pass


class ResidualTooLargeError(BSError):
    def __init__(self, message: str, row: int | None = None):
        self.row = row
        super().__init__(message)


class ConvergenceError(BSError):
    def __init__(self, message: str, best=None):
        self.best = best
        super().__init__(message)


class FiniteDifferenceError(BSError):
    def __init__(self, message: str, point=None):
        self.point = point
        super().__init__(message)
