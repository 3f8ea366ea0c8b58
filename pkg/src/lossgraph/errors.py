"""Exception hierarchy shared by all modules."""


class LossGraphError(Exception):
    """Base class for errors raised by lossgraph."""


class NotDecomposable(LossGraphError):
    pass


class TooLarge(LossGraphError):
    pass


class DomainError(LossGraphError, ValueError):
    pass


class NotPD(LossGraphError, ValueError):
    pass


class Unattainable(LossGraphError):
    pass


class EmptyList(LossGraphError):
    pass


class ParseError(LossGraphError, ValueError):
    def __init__(self, message, row=None, column=None):
        loc = ""
        if row is not None:
            loc = f" (row {row}" + (f", column {column})" if column is not None else ")")
        super().__init__(message + loc)
        self.row = row
        self.column = column


class EmptyAfterFiltering(LossGraphError):
    pass
