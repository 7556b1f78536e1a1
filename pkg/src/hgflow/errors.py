"""Exception types shared across the solver modules."""


class FlowError(Exception):
    """Base class for all solver errors."""


class NonFiniteInputError(FlowError):
    """Input field or height array contains NaN or infinity."""


class NonIntegrableFieldError(FlowError):
    """Vector field fails the discrete curl test and cannot be integrated
    to a single-valued graph."""

    def __init__(self, max_residual, location, tolerance):
        self.max_residual = float(max_residual)
        self.location = tuple(location)
        self.tolerance = float(tolerance)
        super().__init__(
            f"curl residual {self.max_residual:.3e} at node {self.location} "
            f"exceeds tolerance {self.tolerance:.3e}"
        )


class DomainTooSmallError(FlowError):
    """Truncated domain is too small for the requested operation
    (non-decaying boundary values, or characteristic speeds exhaust the box)."""


class NotCertifiedConvexError(FlowError):
    """Characteristic inversion requested without a convexity certificate,
    or with a blow-up verdict."""


class SingularMapError(FlowError):
    """Characteristic map Jacobian is singular at the evaluation point."""


class NoConvergenceError(FlowError):
    """Newton iteration failed to reach tolerance."""

    def __init__(self, residual, iterations):
        self.residual = float(residual)
        self.iterations = int(iterations)
        super().__init__(
            f"no convergence after {self.iterations} iterations, "
            f"residual {self.residual:.3e}"
        )


class ContractViolation(FlowError):
    """Operation called outside its stated precondition."""


class ScenarioError(FlowError):
    """Scenario file failed to parse or validate."""
