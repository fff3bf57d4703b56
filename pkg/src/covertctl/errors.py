"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: configuration problems exit 2,
size-guard refusals exit 3, verification failures exit 4.
"""


class CovertCtlError(Exception):
    """Base class for all errors raised by this package."""


class ModelValidationError(CovertCtlError):
    """A model, belief, or configuration violates a structural constraint."""


class ConfigMismatchError(CovertCtlError):
    """Two components that must agree (e.g. policy artifact and scenario) do not."""


class SizeGuardError(CovertCtlError):
    """A requested computation exceeds a configured size guard."""


class DegenerateMeasurementError(CovertCtlError):
    """A Bayes update had zero normaliser (measurement impossible under the model)."""


class ConsistencyError(CovertCtlError):
    """Inputs that must be mutually consistent (e.g. a joint and its marginal) are not."""


class NumericalError(CovertCtlError):
    """A numerical operation failed (singular innovation covariance, non-PSD matrix)."""
