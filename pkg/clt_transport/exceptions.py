"""Exceptions raised by the clt_transport package."""


class CLTTransportError(Exception):
    """Base class for all errors raised by clt_transport."""
    pass


class DistributionError(CLTTransportError, ValueError):
    """Invalid input when building or transforming a distribution."""
    pass


class SupportLimitError(CLTTransportError):
    """A convolution would exceed the configured number of support pairs."""
    pass


class DegenerateLawError(CLTTransportError, ValueError):
    """The operation needs a law with positive variance."""
    pass


class CumulantOrderError(CLTTransportError, ValueError):
    """Requested cumulant order is outside the supported range."""
    pass


class CertificateError(CLTTransportError, ValueError):
    """A class certificate cannot be computed for the given input."""
    pass


class TiltDomainError(CLTTransportError, ValueError):
    """Tilt parameter or target mean outside the admissible domain."""
    pass


class QuadratureError(CLTTransportError):
    """Numerical integration did not converge."""
    pass


class CrossCheckError(CLTTransportError):
    """Two independent computations of the same quantity disagree."""
    pass


class BracketError(CLTTransportError):
    """Root bracketing failed (e.g. Orlicz objective never drops below one)."""
    pass


class OracleSizeError(CLTTransportError, ValueError):
    """The linear-programming oracle was given too many atoms."""
    pass


class SweepConfigError(CLTTransportError, ValueError):
    """Invalid sweep configuration or law specification."""
    pass


class ReportError(CLTTransportError):
    """Failure while writing or reading a sweep report."""
    pass
