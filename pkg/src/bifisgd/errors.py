"""Exception hierarchy shared by all toolkit modules."""


class ToolkitError(Exception):
    """Base class for all errors raised by this package."""


class ConfigFault(ToolkitError):
    """Invalid configuration value or combination (caught before any run starts)."""


class NumericalFault(ToolkitError):
    """A non-finite value appeared where a finite one is required.

    ``index`` identifies the offending vector component when known.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class DomainFault(ToolkitError):
    """Argument outside the mathematical domain of the operation."""


class DimensionFault(ToolkitError):
    """Array shapes inconsistent with the operation's contract."""


class DegenerateAlpha(ToolkitError):
    """Control-variate coefficient undefined because the control has (near) zero variance."""


class SingularCovariance(ToolkitError):
    """Sample covariance matrix too ill-conditioned to invert."""


class InsufficientData(ToolkitError):
    """Not enough points to perform the requested estimate."""


class EigenFailure(ToolkitError):
    """Eigenvalue solver failed to converge."""


class SolverDivergence(ToolkitError):
    """Iterative linear solver exhausted its iteration budget.

    ``xi`` carries the random realization of the offending solve when the
    failure surfaced through a stochastic gradient oracle.
    """

    def __init__(self, message, xi=None):
        super().__init__(message)
        self.xi = xi


class SingularSystem(ToolkitError):
    """Linear system is singular (e.g. boundary conditions leave rigid-body modes)."""
