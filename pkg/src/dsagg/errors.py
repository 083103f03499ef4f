"""Exception hierarchy shared across the package.

Errors fall into two broad groups: input problems (malformed or
out-of-contract instances, overrides, files) and computational
failures (exhausted resampling, oversized enumerations, internal
inconsistencies that indicate a bug rather than bad input).
"""

from __future__ import annotations


class DsaggError(Exception):
    """Base class for all package-specific errors."""


class InputError(DsaggError):
    """Bad user-supplied data; maps to exit code 2 on the CLI."""


# -- instance validation ------------------------------------------------


class InvalidUserCount(InputError):
    """The model requires at least three users."""


class InvalidSet(InputError):
    """A listed subset contains ids outside 1..K (or is malformed)."""


class NothingToProtect(InputError):
    """The union of all security sets is empty."""


class CollusionTooLarge(InputError):
    """A collusion set has more than K-2 members."""


class ClosureTooLarge(DsaggError):
    """Materializing the downward closures would exceed the configured cap."""


# -- linear programming --------------------------------------------------


class NotFractionalCase(DsaggError):
    """The rate program is only defined for fractional-rate instances."""


class Infeasible(DsaggError):
    """No point satisfies the constraints."""


class Unbounded(DsaggError):
    """The objective can be decreased without limit."""


class TooLarge(DsaggError):
    """An exhaustive enumeration would exceed its configured budget."""


# -- scheme synthesis ----------------------------------------------------


class MissingLpSolution(DsaggError):
    """A fractional-rate instance needs the solved program's assignment."""


class ResampleExhausted(DsaggError):
    """No sampled coefficient realization passed verification.

    Usually means the chosen field is too small for the required
    independence structure to exist (or to be found reliably).
    """


class NonRationalSolution(DsaggError):
    """Key-splitting needs exact rational rates; floats are rejected."""


class OverrideNotPrime(InputError):
    """A user-supplied field modulus must be prime."""


# -- verification and simulation ------------------------------------------


class DimensionMismatch(DsaggError):
    """Variables in one analysis must share modulus and seed layout."""


class ShapeMismatch(InputError):
    """A supplied override array has the wrong shape."""


class UnknownUser(InputError):
    """User id outside 1..K."""


class InternalInconsistency(DsaggError):
    """A condition that should be unreachable was hit; indicates a bug."""
