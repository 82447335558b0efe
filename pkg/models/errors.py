"""Error taxonomy for Skewalk.

Every error carries the process exit code the command line maps it to.
"""

from __future__ import annotations


class SkewalkError(Exception):
    """Base class for all domain errors."""

    exit_code: int = 4


# ---- configuration (exit 2) ----
class ConfigInvalid(SkewalkError, ValueError):
    """The run configuration is malformed or inconsistent."""

    exit_code = 2


class InvalidPMF(ConfigInvalid):
    """Probabilities are negative, do not sum to one, or the support is malformed."""


class NotCentered(ConfigInvalid):
    """A step law has nonzero mean."""


class Periodic(ConfigInvalid):
    """A step law is not aperiodic (span gcd is not 1)."""


class DegenerateRestart(ConfigInvalid):
    """The restart law puts all its mass on zero."""


class NegativeRestartForY(ConfigInvalid):
    """The reflected model was given a restart law with negative support."""


class WrongModelKind(ConfigInvalid):
    """An operation was called with a model of the other kind."""


class UnknownCurve(ConfigInvalid):
    """A plot-data curve name does not match any recorded check."""


# ---- resources (exit 3) ----
class ResourceLimit(SkewalkError, RuntimeError):
    """A state-count or memory cap was exceeded."""

    exit_code = 3


# ---- numerics (exit 4) ----
class NumericalFailure(SkewalkError, RuntimeError):
    """A numerical routine could not produce a trustworthy value."""


class TruncationTooCoarse(NumericalFailure):
    """The ladder truncation leaves too much mass unaccounted for."""


class TableTooShort(NumericalFailure):
    """A renewal table was queried beyond the range it was built for."""


class TailFitUnstable(NumericalFailure):
    """The Spitzer series tail does not decay at the expected rate."""


class DivisionDegenerate(NumericalFailure):
    """A normalising sum vanished."""


class NoConventionFits(NumericalFailure):
    """No boundary convention matches the computed survival asymptotics."""


class InsufficientCounts(NumericalFailure):
    """A chi-square cell has fewer than five expected counts."""


# ---- argument domain ----
class NonpositiveTime(SkewalkError, ValueError):
    """A time argument was not strictly positive."""


class NonpositiveParameter(SkewalkError, ValueError):
    """A scale parameter was not strictly positive."""


class DegenerateInterval(SkewalkError, ValueError):
    """An interval does not satisfy s1 < s < s2."""


class GridOutOfRange(SkewalkError, ValueError):
    """A time grid leaves [0, 1] or asks for steps the path does not have."""
