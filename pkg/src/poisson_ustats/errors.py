"""Exception types shared across the package."""


class WindowError(ValueError):
    """Window geometry is invalid or degenerate."""


class ConfigError(ValueError):
    """An operation or experiment was configured inconsistently."""


class CapacityError(RuntimeError):
    """A combinatorial enumeration would exceed its hard guard."""


class IntegrationError(RuntimeError):
    """A Monte Carlo integrand produced a non-finite value."""


class DegenerateFunctionalError(RuntimeError):
    """A variance estimate is indistinguishable from zero."""


class AssumptionViolationError(RuntimeError):
    """A hypothesis of a bound could not be confirmed numerically."""


class LocalityError(ValueError):
    """The operation needs a kernel with a locality radius."""
