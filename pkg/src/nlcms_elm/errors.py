"""Exception types raised across the package."""


class NlcmsError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(NlcmsError, ValueError):
    pass


class NumericFailureError(NlcmsError, ArithmeticError):
    def __init__(self, message, iteration=None):
        if iteration is not None:
            message = f"{message} (iteration {iteration})"
        super().__init__(message)
        self.iteration = iteration


class SchemaError(NlcmsError, ValueError):
    pass


class DataParseError(NlcmsError, ValueError):
    def __init__(self, message, row=None, column=None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{message} at {', '.join(where)}"
        super().__init__(message)
        self.row = row
        self.column = column


class FormatError(NlcmsError, ValueError):
    pass
