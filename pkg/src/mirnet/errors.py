"""Exception hierarchy shared across the package.

Everything user-facing derives from MirnetError so the service layer can map
domain failures to 400 responses without enumerating modules.
"""


class MirnetError(Exception):
    """Base class for all domain errors raised by this package."""


class AudioFormatError(MirnetError):
    """Audio file violates the required container or sample format."""


class ConfigError(MirnetError):
    """Run configuration is malformed or contains unknown keys."""


class CorpusError(MirnetError):
    """Corpus layout, manifests, or audio files failed validation."""


class CheckpointError(MirnetError):
    """Checkpoint file cannot be read."""


class BadMagicError(CheckpointError):
    """Checkpoint does not start with the expected magic bytes."""


class VersionMismatchError(CheckpointError):
    """Checkpoint was written with an unsupported format version."""


class TruncatedCheckpointError(CheckpointError):
    """Checkpoint ends before all declared payload bytes."""


class TrainingError(MirnetError):
    """Training aborted, e.g. the loss became non-finite."""
