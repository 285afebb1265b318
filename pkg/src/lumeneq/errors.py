"""Exception types shared across the package."""


class LumeneqError(Exception):
    """Base class for all package-specific failures."""


class ContractViolation(LumeneqError):
    """An internal API contract was broken (caller bug, not user input)."""


class TrainingDiverged(LumeneqError):
    """Training produced a non-finite loss. Carries the history so far."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = history


class ModelFileError(LumeneqError):
    """Base class for model-container load failures."""


class ModelFormatError(ModelFileError):
    """Bad magic string or unsupported container version."""


class ModelTruncatedError(ModelFileError):
    """File ended before the declared payload was complete."""


class ModelChecksumError(ModelFileError):
    """Stored checksum does not match the file contents."""


class ModelArchitectureError(ModelFileError):
    """Stored architecture hash disagrees with the stored architecture."""
