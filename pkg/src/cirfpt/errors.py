"""Exception hierarchy shared across the package."""


class CirFptError(Exception):
    """Base class for all package errors."""


class NonConvergent(CirFptError):
    """An infinite series or iteration hit its term cap before converging."""


class InvalidB(CirFptError, ValueError):
    """Kummer's function was asked for a lower parameter in {0, -1, -2, ...}."""


class EntranceViolation(CirFptError, ValueError):
    """The lower boundary c is not an entrance boundary (s < 1)."""


class InvalidParams(CirFptError, ValueError):
    """CIR parameters violate a basic domain constraint."""


class DegenerateStart(CirFptError, ValueError):
    """The start value coincides with the threshold, so T is identically 0."""


class UnsupportedConfiguration(CirFptError, ValueError):
    """A configuration outside the supported scope (e.g. a downcrossing)."""


class InvalidReference(CirFptError, ValueError):
    """Gamma reference parameters outside alpha > -1, beta > 0."""


class NoValidOrder(CirFptError):
    """No truncation order satisfies the sign conditions."""


class PrecisionLoss(CirFptError):
    """Two independent coefficient routes disagree beyond tolerance."""


class FitFailure(CirFptError):
    """A positivity patch could not be fitted."""


class EmptySample(CirFptError, ValueError):
    """An estimator received no usable observations."""


class ConfigError(CirFptError, ValueError):
    """Invalid simulation or sampler configuration."""


class InvalidEnvelope(CirFptError):
    """The acceptance-rejection envelope constant came out below 1."""


class EnvelopeViolation(CirFptError):
    """An acceptance ratio exceeded 1, so M was underestimated."""
