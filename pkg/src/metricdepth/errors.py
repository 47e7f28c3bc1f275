"""Exception types shared across the package.

The hierarchy distinguishes plain usage errors (bad arguments, unusable
samples) from numeric failures (inputs that are not positive definite,
distances that cannot come from a metric, decodes that collapse). The CLI
maps the former to exit code 2 and the latter to exit code 3.
"""


class InvalidArgumentError(ValueError):
    """An argument violates a documented precondition."""


class InsufficientSampleError(InvalidArgumentError):
    """The sample is too small for the requested computation."""


class NumericFailureError(ValueError):
    """Base class for failures of the numerics rather than the call."""


class MetricViolationError(NumericFailureError):
    """Distances are inconsistent with any metric beyond round-off."""


class NotPositiveDefiniteError(NumericFailureError):
    """A matrix required to be positive definite is not."""


class DegenerateDecodeError(NumericFailureError):
    """A coordinate vector decodes to a degenerate object."""
