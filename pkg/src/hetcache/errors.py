"""Exception hierarchy shared by all modules."""


class HetcacheError(Exception):
    """Base class for library errors."""


class InvalidArgument(HetcacheError, ValueError):
    pass


class DomainError(HetcacheError, ValueError):
    """Argument outside the domain of a numeric function."""


class ScenarioError(HetcacheError, ValueError):
    """Scenario failed validation; ``violations`` lists what broke."""

    def __init__(self, message, violations=()):
        super().__init__(message)
        self.violations = list(violations)


class CapacityError(HetcacheError, ValueError):
    pass


class InfeasiblePrefixError(CapacityError):
    pass


class ConstraintError(HetcacheError, ValueError):
    """Placement or allocation violates a named constraint."""

    def __init__(self, constraint, message):
        super().__init__(f"{constraint}: {message}")
        self.constraint = constraint


class DegenerateBandwidthError(HetcacheError, ValueError):
    pass


class NumericError(HetcacheError, ArithmeticError):
    """Numerical procedure failed to reach its tolerance."""

    def __init__(self, message, achieved=None, index=None):
        super().__init__(message)
        self.achieved = achieved
        self.index = index


class ConsistencyError(HetcacheError, RuntimeError):
    """An internal invariant (e.g. monotone descent) was broken."""


class BudgetExceeded(HetcacheError, ValueError):
    pass
