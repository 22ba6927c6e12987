"""Exception types shared across the package."""


class CrossfillError(Exception):
    """Base class for crossfill-specific failures."""


class ConfigError(CrossfillError):
    """Invalid or inconsistent configuration (CLI exit code 2)."""


class DatasetEmptyError(CrossfillError):
    """A dataset root contained no decodable images."""


class InsufficientSamplesError(CrossfillError):
    """Too few samples to estimate the requested statistic."""


class NumericalInstabilityError(CrossfillError):
    """A numerical routine failed its internal accuracy check."""


class TrainingAbort(CrossfillError):
    """Training hit a non-finite loss or gradient (CLI exit code 3).

    Carries a reference to the last good checkpoint, if one was written.
    """

    def __init__(self, message: str, last_checkpoint: str | None = None):
        super().__init__(message)
        self.last_checkpoint = last_checkpoint


class CheckpointMismatchError(CrossfillError):
    """Checkpoint is incompatible with the requested model config."""
