"""Exception types shared across the package."""

from __future__ import annotations


class StructuralError(ValueError):
    """Shapes or layouts that do not fit together (state vs variant, cache vs net)."""


class InfeasibleInitializationError(ValueError):
    """Initial conditions that would need a negative susceptible pool."""


class NumericError(ArithmeticError):
    """A non-finite or otherwise invalid number appeared during a computation."""

    def __init__(self, message: str, compartment: str | None = None, day: int | None = None):
        super().__init__(message)
        self.compartment = compartment
        self.day = day

    def __str__(self) -> str:
        msg = super().__str__()
        where = []
        if self.compartment is not None:
            where.append(f"compartment={self.compartment}")
        if self.day is not None:
            where.append(f"day={self.day}")
        return f"{msg} ({', '.join(where)})" if where else msg


class DivergenceError(NumericError):
    """Training produced a non-finite loss. ``result`` holds the last finite fit, if any."""

    def __init__(self, message: str, iteration: int, result=None):
        super().__init__(message)
        self.iteration = iteration
        self.result = result


class DataError(ValueError):
    """Malformed or inconsistent observed data."""


class DateGapError(DataError):
    pass


class MonotonicityError(DataError):
    pass


class ConsistencyError(DataError):
    pass
