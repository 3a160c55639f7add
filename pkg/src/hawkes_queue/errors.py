"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: :class:`DomainError` -> 1,
:class:`NumericalError` -> 2.
"""


class DomainError(ValueError):
    """An argument lies outside the domain of the requested operation."""


class ParameterError(DomainError):
    """Invalid model parameters; ``field`` names the offending entry."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class NumericalError(ArithmeticError):
    """A numerical procedure could not produce a trustworthy value."""


class IntegrationError(NumericalError):
    """ODE integration aborted; carries the offending time and state."""

    def __init__(self, message, t=None, y=None):
        super().__init__(message)
        self.t = t
        self.y = y


class NonFiniteError(IntegrationError):
    pass


class StepUnderflowError(IntegrationError):
    pass


class EvaluationError(NumericalError):
    """A transform could not be evaluated at the requested query."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class ExplosionError(NumericalError):
    """A simulated path exceeded the event cap."""


class SimulationError(NumericalError):
    """Internal simulator invariant violated (e.g. thinning bound)."""
