"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the requested function."""


class SpecError(ValueError):
    """A contest definition violates one of its invariants."""


class NumericalError(ArithmeticError):
    """Base class for failures of a numerical procedure."""


class NonConvergenceError(NumericalError):
    """An iterative or adaptive procedure exhausted its budget."""


class NegativeArgumentError(NumericalError):
    """The argument passed to the inverse cost is materially negative."""


class AcceptanceStarvationError(NumericalError):
    """A rejection sampler accepts too rarely to be practical."""
