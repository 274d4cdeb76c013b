"""Exception types shared across the package."""


class ConvoyError(Exception):
    """Base class for all package errors."""


class DimensionError(ConvoyError):
    """Operands have incompatible or unsupported shapes."""


class DomainError(ConvoyError):
    """A value violates a mathematical precondition (sign, range, ...)."""


class NumericError(ConvoyError):
    """A computation produced non-finite values (overflow, invalid)."""


class SingularMatrixError(ConvoyError):
    """Linear solve hit a (numerically) singular matrix."""

    def __init__(self, message, rcond=None):
        super().__init__(message)
        self.rcond = rcond


class EigenConvergenceError(ConvoyError):
    """Eigenvalue iteration failed to converge."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class IntegrationError(ConvoyError):
    """Adaptive ODE integration failed (step underflow / step cap)."""

    def __init__(self, message, last_time=None):
        super().__init__(message)
        self.last_time = last_time


class DegenerateParameterError(ConvoyError):
    """Edge weights sit on a boundary where the closed forms break down."""

    def __init__(self, message, edge=None):
        super().__init__(message)
        self.edge = edge


class SolvabilityError(ConvoyError):
    """The solvability matrix of a game/control problem is singular."""


class LemmaViolationError(ConvoyError):
    """A structural identity that must hold by construction failed.

    Raised only on internal inconsistencies; indicates a build bug, not
    bad user input.
    """


class StaleGainsError(ConvoyError):
    """Feedback gains were synthesized for a different edge set."""


class ConfigError(ConvoyError):
    """Scenario configuration is malformed or violates the schema."""

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field
