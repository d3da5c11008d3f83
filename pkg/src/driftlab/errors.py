"""Exception hierarchy shared by all driftlab modules."""


class DriftlabError(Exception):
    """Base class; the CLI maps subclasses onto exit codes."""

    exit_code = 1


class DomainError(DriftlabError, ValueError):
    exit_code = 4


class ConfigError(DriftlabError, ValueError):
    exit_code = 2


class ConvergenceError(DriftlabError, RuntimeError):
    exit_code = 3


class DivergenceError(ConvergenceError):
    """State blew up during time integration."""


class StiffnessError(ConvergenceError):
    """Adaptive step size underflowed."""


class SingularError(ConvergenceError):
    """Newton Jacobian could not be factored."""


class BranchEndError(ConvergenceError):
    """Continuation step size underflowed; carries the partial branch."""

    def __init__(self, message, branch=None):
        super().__init__(message)
        self.branch = branch


class InvalidSaddleError(ConvergenceError):
    pass


class EscapeError(ConvergenceError):
    pass


class QuadratureError(ConvergenceError):
    pass


class EstimatorError(DriftlabError, ValueError):
    exit_code = 4


class GridError(DomainError):
    pass
