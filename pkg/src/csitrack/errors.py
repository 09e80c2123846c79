"""Exception hierarchy shared across the toolkit."""


class CsiTrackError(Exception):
    """Base class for all csitrack errors."""


class WindowUnderfullError(CsiTrackError):
    """Not enough packets buffered yet; the caller should keep feeding records."""


class DegenerateGeometryError(CsiTrackError):
    """Steering matrix is ill-conditioned (near-collinear path angles)."""


class WeakPathError(CsiTrackError):
    """A path weight magnitude is too small to carry usable phase."""


class InsufficientPathsError(CsiTrackError):
    """Fewer than two usable paths; offset cancellation needs a path pair."""


class UnobservableDisplacementError(CsiTrackError):
    """Stacked geometry rows do not constrain both displacement components."""


class StreamOrderError(CsiTrackError):
    """CSI records arrived out of packet order or misaligned across APs."""


class ConfigError(CsiTrackError):
    """Invalid run configuration; the message names the offending field."""


class TraceParseError(CsiTrackError):
    """Malformed trace or trajectory file."""

    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class TraceVersionError(TraceParseError):
    """Unrecognized trace format version."""
