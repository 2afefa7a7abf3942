"""Exception types shared across the package."""


class VectnError(Exception):
    """Base class for all errors raised by this package."""


class DatasetError(VectnError):
    """Malformed dataset files or records."""


class FaceBackendError(VectnError):
    """Face detection or attribute analysis failed for an image."""


class EncoderError(VectnError):
    """A text/visual encoder backend failed or produced degenerate output."""


class BackendError(VectnError):
    """Backend resolution or construction failed."""


class CheckpointError(VectnError):
    """Unreadable, incompatible, or corrupt checkpoint file."""


class TrainingError(VectnError):
    """Training aborted (divergence, empty batch, bad configuration)."""
