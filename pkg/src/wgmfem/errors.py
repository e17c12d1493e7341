"""Exception types raised across the package."""


class WGMFEMError(Exception):
    """Base class for all package errors."""


class InvalidDomain(WGMFEMError):
    pass


class UnsupportedDegree(WGMFEMError):
    pass


class DegenerateElement(WGMFEMError):
    pass


class InvalidProfile(WGMFEMError):
    pass


class InvalidCoefficient(WGMFEMError):
    pass


class SingularSystem(WGMFEMError):
    pass


class IncompleteCase(WGMFEMError):
    pass


class BudgetExceeded(WGMFEMError):
    """Raised when a refinement level would exceed the configured DOF budget."""

    def __init__(self, level, ndof, budget):
        self.level = level
        self.ndof = ndof
        self.budget = budget
        super().__init__(
            f"level {level} needs {ndof} unknowns, over the budget of {budget:g}"
        )
