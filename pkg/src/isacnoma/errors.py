"""Exception and warning types raised across the simulator."""


class IsacError(Exception):
    """Base class for all simulator errors."""


class ShapeError(IsacError, ValueError):
    pass


class ConfigError(IsacError, ValueError):
    pass


class NumericalFailure(IsacError, ArithmeticError):
    def __init__(self, message, iterations=None):
        super().__init__(message)
        self.iterations = iterations


class ParseError(IsacError, ValueError):
    """Malformed channel trace or config file.

    ``line`` is 1-based when known, ``field`` names the offending token.
    """

    def __init__(self, message, line=None, field=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.line = line
        self.field = field


class SchemaError(IsacError, ValueError):
    pass


class InfeasibleError(IsacError):
    """No power allocation meets the weak-user rate floor.

    ``best_effort`` holds the allocation closest to feasibility.
    """

    def __init__(self, message, best_effort=None):
        super().__init__(message)
        self.best_effort = best_effort


class NumericalWarning(RuntimeWarning):
    pass


class BlockedWithoutFallback(UserWarning):
    """Blockage was declared but no NLOS channel is available to switch to."""
