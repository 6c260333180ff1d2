"""Exception types shared across the package."""


class DomainError(ValueError):
    """An input lies outside the domain of an operation (not a distribution, q not positive, ...)."""


class ScheduleError(ValueError):
    """Step-size or weight schedule parameters are inconsistent."""


class InstanceError(ValueError):
    """An MDP or game instance is malformed.

    ``line`` and ``field`` point at the offending input when the instance came
    from a text file.
    """

    def __init__(self, message, *, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


class OracleNonConvergence(RuntimeError):
    """An iterative oracle stopped at its iteration cap before reaching tolerance."""

    def __init__(self, message, *, best_gap=None, iterations=None):
        self.best_gap = best_gap
        self.iterations = iterations
        super().__init__(message)


class InvariantViolation(AssertionError):
    """A run-time invariant checked in debug mode was violated."""
