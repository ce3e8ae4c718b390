"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class NumericalError(ArithmeticError):
    """A solver failed to converge or a numerical assumption was violated."""


class ConfigError(ValueError):
    """Invalid experiment configuration text.

    ``line`` and ``column`` are 1-based and point at the offending token
    (``None`` when the problem is not tied to a position).
    """

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            loc = f"line {line}" + (f", column {column}" if column is not None else "")
            message = f"{loc}: {message}"
        super().__init__(message)
