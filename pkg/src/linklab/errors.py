"""Exception hierarchy shared across the package.

Estimation-related errors are hard failures on purpose: silently producing
NaN from an empty group corrupts every downstream regression.
"""


class LinkLabError(Exception):
    """Base class for all package errors."""


class ConfigError(LinkLabError):
    """One or more scenario config violations.

    Carries the full list of path-qualified messages so callers can report
    every problem at once instead of the first.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class InvalidAllocationError(LinkLabError):
    """Treatment allocation outside [0, 1]."""


class EmptyGroupError(LinkLabError):
    """A required estimation group matched no records."""


class InvalidDesignError(LinkLabError):
    """Design parameters are degenerate or cells overlap."""


class UndefinedSpilloverError(LinkLabError):
    """Spillover requested at p = 1, where no control group exists."""


class InsufficientSweepError(LinkLabError):
    """Interference diagnostic needs at least two distinct allocations."""


class ModelError(LinkLabError):
    """Invalid competition-model state (e.g. non-positive weight)."""


class CollinearityError(LinkLabError):
    """Regression design matrix is rank deficient."""

    def __init__(self, column, message=None):
        self.column = column
        super().__init__(message or f"design matrix is rank deficient: column {column!r}")


class InvalidLagError(LinkLabError):
    """HAC lag is too large for the panel."""


class NormalizationError(LinkLabError):
    """Normalization base must be strictly positive."""


class EmptyLogError(LinkLabError):
    """A simulation produced no completed sessions."""


class CalibrationError(LinkLabError):
    """Calibration requires an inert-treatment baseline."""


class EstimationError(LinkLabError):
    """Catch-all for numerically invalid estimation states."""
