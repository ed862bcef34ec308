"""Exception types shared across the package."""


class CertJuliaError(Exception):
    """Base class for all package-specific errors."""


class DenominatorVanishes(CertJuliaError):
    """A rational map's denominator ball contains zero.

    Signals that the working precision is too small or the evaluation
    point is too close to a pole.
    """


class PrecisionExhausted(CertJuliaError):
    """The retry cap on working precision was hit.

    This indicates an inconsistent certificate, never a silent
    misclassification: callers must surface it.
    """


class PointInsideCover(CertJuliaError):
    """A distance-to-cover query was made for a point inside the cover."""


class RootFindingFailure(CertJuliaError):
    """Preimage solving did not converge at working precision."""


class InvalidConstants(CertJuliaError):
    """Constant-derivation inputs are out of their legal range."""


class InsufficientSamples(CertJuliaError):
    """An estimation procedure observed fewer events than it needs."""


class CertificateInvalid(CertJuliaError):
    """A certificate failed validation and the caller did not override."""
