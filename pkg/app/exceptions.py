"""
Error hierarchy shared by the services and the command-line layer.
"""


class LabError(Exception):
    """Base class for every error raised by the laboratory."""


class ArgumentError(LabError, ValueError):
    """An operation received parameters outside its contract."""


class DomainError(ArgumentError):
    """An evaluation point lies outside the supported domain."""


class RangeError(ArgumentError):
    """A size or height exceeds the supported range."""


class SingularSeriesError(ArgumentError):
    """Division by a series whose leading coefficient is numerically zero."""


class TableFormatError(LabError, ValueError):
    """A cached table file is malformed, truncated or fails its checksum."""


class ZeroTableError(LabError, ValueError):
    """A zero-ordinate file cannot be parsed or violates its invariants."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ResourceBudgetError(LabError, MemoryError):
    """A requested allocation exceeds the configured memory budget."""

    def __init__(self, requested_mb: float, budget_mb: int):
        self.requested_mb = requested_mb
        self.budget_mb = budget_mb
        super().__init__(
            f"table needs ~{requested_mb:.0f} MB, over the memory budget of "
            f"{budget_mb} MB (raise MTL_MEMORY_BUDGET_MB or lower --nmax)"
        )


class NumericalError(LabError, ArithmeticError):
    """A numerical procedure failed to reach its target accuracy."""

    def __init__(self, message: str, achieved: float | None = None):
        self.achieved = achieved
        if achieved is not None:
            message = f"{message} (achieved tolerance {achieved:.3e})"
        super().__init__(message)
