"""Exception types shared across the package."""


class Se3OptError(Exception):
    """Base class for all se3opt errors."""


class NotSkewError(Se3OptError):
    """Matrix handed to vee() has a symmetric part above tolerance."""


class SingularPotentialError(Se3OptError):
    """A mass element of the body is too close to the attracting center."""


class StepTooLargeError(Se3OptError):
    """Step size violates the solvability margin of the implicit attitude update."""


class NoConvergenceError(Se3OptError):
    """An iterative solver failed to reach its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class SingularWeightError(Se3OptError):
    """Control weight matrix is not symmetric positive definite."""


class SingularJacobianError(Se3OptError):
    """A matrix required by a Newton step is numerically singular."""

    def __init__(self, message, cond=None):
        super().__init__(message)
        self.cond = cond


class MaxIterationsError(Se3OptError):
    """Iteration limit reached.  Carries the best iterate found so far."""

    def __init__(self, message, best=None, log=None):
        super().__init__(message)
        self.best = best
        self.log = log


class InfeasibleSubproblemError(Se3OptError):
    """The constrained subproblem of the optimizer has no solution."""


class ConfigError(Se3OptError):
    """Scenario configuration failed validation.  Names the offending field."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
