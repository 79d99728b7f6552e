"""Exception hierarchy and the CLI exit codes attached to it."""


class EigenWaveError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(EigenWaveError):
    """Invalid configuration, precondition violation, or malformed input file."""

    exit_code = 2


class ResourceLimitError(ConfigError):
    """A size cap was exceeded (e.g. dense assembly above the configured limit)."""


class NumericalError(EigenWaveError):
    """A numerical procedure failed to produce a usable result."""

    exit_code = 3


class SolverError(NumericalError):
    """Linear solver did not reach its tolerance.

    Carries the final relative residual and the iteration count.
    """

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class StabilityError(NumericalError):
    """Time-stepping blew up (growth guard tripped or non-finite values)."""

    def __init__(self, message, step=None, amplitude=None):
        super().__init__(message)
        self.step = step
        self.amplitude = amplitude


class ConvergenceError(NumericalError):
    """Eigensolver ran out of iterations/restarts.

    ``history`` holds the eigenvalue-estimate trail; ``partial`` may hold a
    result object with whatever pairs did converge.
    """

    def __init__(self, message, history=None, partial=None):
        super().__init__(message)
        self.history = history
        self.partial = partial


class InvariantError(EigenWaveError):
    """An internal consistency check failed; indicates a bug, not bad input."""

    exit_code = 4
