"""Exception types shared across the package.

The CLI maps these onto exit codes: data problems exit 2, numerical
divergence exits 3.
"""


class N2NSeismicError(Exception):
    """Base class for all package errors."""


class DegenerateAmplitudeError(N2NSeismicError, ValueError):
    """Raised when a section has no amplitude range (all zeros)."""


class MaskOverlapError(N2NSeismicError, ValueError):
    pass


class InfiniteSNRError(N2NSeismicError, ValueError):
    """Raised when the noise power is exactly zero."""


class DivergenceError(N2NSeismicError, RuntimeError):
    """Raised when training produces a non-finite loss or gradient.

    ``model`` holds the last finite model state (the failed update is never
    applied), so callers can persist it for post-mortem inspection.
    """

    def __init__(self, message, model=None, step=None):
        super().__init__(message)
        self.model = model
        self.step = step


class GridFormatError(N2NSeismicError, ValueError):
    pass


class ChecksumError(GridFormatError):
    pass


class ConfigError(N2NSeismicError, ValueError):
    pass
