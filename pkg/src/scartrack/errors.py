"""Exception taxonomy shared by all scartrack modules.

Callers that need exit-code or HTTP-status mapping dispatch on these
classes, so raise the most specific one that applies.
"""


class ScartrackError(Exception):
    """Base class for every error raised by this package."""


class ArgumentError(ScartrackError, ValueError):
    """A parameter value violates its documented domain."""


class DimensionError(ScartrackError):
    """Two rasters or masks that must share a shape do not."""


class FormatError(ScartrackError):
    """A file payload is malformed; message names the offending line or byte."""


class RegistrationError(ScartrackError):
    """Crop target is incompatible with the source grid lattice."""


class CoverageError(ScartrackError):
    """Crop target does not intersect the source extent."""


class OrderingError(ScartrackError):
    """Frame dates are duplicated or not strictly increasing."""


class TemplateError(ScartrackError):
    """A frame does not match the sequence's common grid template."""


class LoadError(ScartrackError):
    """A manifest or session store cannot be reconstructed."""


class PromptPlacementError(ScartrackError):
    """A positive prompt sits on a cell that cannot belong to the scar."""

    def __init__(self, message: str, row: int | None = None, col: int | None = None,
                 frame_index: int | None = None):
        super().__init__(message)
        self.row = row
        self.col = col
        self.frame_index = frame_index


class InitializationError(ScartrackError):
    """Session initialization prompts are unusable (e.g. no positive point)."""


class SessionStateError(ScartrackError):
    """A mutation was requested from a state that does not allow it."""


class PropagationError(ScartrackError):
    """The backend failed mid-propagation; ``halted_at`` is the failing frame."""

    def __init__(self, message: str, halted_at: int):
        super().__init__(message)
        self.halted_at = halted_at


class ProtocolError(ScartrackError):
    """A backend response violates the wire contract."""


class BackendUnavailableError(ScartrackError):
    """The external backend timed out or refused the request."""
