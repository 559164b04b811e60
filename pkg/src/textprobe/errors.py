"""Exception types shared across the package."""


class TextProbeError(Exception):
    """Base class for errors raised by this package."""


class DataError(TextProbeError):
    """A data file or record could not be parsed or validated."""


class ConfigError(TextProbeError):
    """An experiment configuration is invalid."""


class TrainingError(TextProbeError):
    """Training diverged or hit a numerical failure."""


class ModelFormatError(TextProbeError):
    """A model container file is corrupt or of the wrong kind/version."""


class StageError(TextProbeError):
    """A pipeline stage failed; carries the stage name."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"stage '{stage}' failed: {message}")
        self.stage = stage
