"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: validation failures exit 2, I/O and
snapshot problems exit 3, numeric domain errors exit 4.
"""


class PropfuseError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(PropfuseError, ValueError):
    """An input violates a documented invariant (bounds, unknown class, ...)."""


class NumericDomainError(PropfuseError, ValueError):
    """A quantity was requested outside its mathematical domain."""


class NoEvidenceError(NumericDomainError):
    """Moments were queried on an accumulator with zero total weight."""


class UndefinedMomentsError(NumericDomainError):
    """Inverse-gamma moments require shape > 1."""


class SnapshotError(PropfuseError):
    """A belief snapshot is structurally broken and cannot be restored."""
