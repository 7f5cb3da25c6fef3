"""Exception types shared across the solver."""


class GaussFlowError(Exception):
    """Base class for all library errors."""


class SpacelikeViolationError(GaussFlowError):
    """Gradient magnitude reached or exceeded the causal limit |Du| = 1."""


class ConvexityError(GaussFlowError):
    """A field that must be strictly convex has an indefinite Hessian."""


class BoundaryMembershipError(GaussFlowError):
    """A point claimed to lie on a domain boundary does not."""


class StepFailureError(GaussFlowError):
    """Newton failed to produce an admissible state before tau underflowed."""


class NonConvergenceError(GaussFlowError):
    """The flow did not reach the translator tolerance within max_steps.

    Carries the monitor history collected so far in ``history``.
    """

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = history if history is not None else []


class OracleFailureError(GaussFlowError):
    """A ground-truth oracle could not bracket or converge."""


class ConfigError(GaussFlowError):
    """A run configuration file is missing, malformed, or inconsistent."""
