"""Exception types shared across the package."""


class MlgibbsError(Exception):
    """Base class for all package errors."""


class DimensionError(MlgibbsError):
    """Operand shapes do not conform."""


class DomainError(MlgibbsError):
    """A parameter is outside its mathematical domain."""


class NumericalError(MlgibbsError):
    """An iteration produced NaN/Inf (e.g. indefinite operator in CG)."""


class InvalidAssignment(MlgibbsError):
    """Cluster assignment has gaps or empty clusters."""


class HierarchyError(MlgibbsError):
    """Coarsening cannot reach the requested coarse size."""


class SetupError(MlgibbsError):
    """Preconditioner setup is impossible for this hierarchy."""


class ConfigError(MlgibbsError):
    """Invalid schedule/experiment configuration."""


class EstimatorError(MlgibbsError):
    """Estimator cannot be finalized (e.g. zero kept samples at a level)."""


class ParseError(MlgibbsError):
    """Malformed input file."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
