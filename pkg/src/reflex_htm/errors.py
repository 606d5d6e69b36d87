"""Exception hierarchy for reflex-htm.

The CLI maps these onto exit codes: validation problems exit 1, I/O problems exit 2.
"""


class ReflexHtmError(Exception):
    """Base class for all engine errors."""


class ContractViolation(ReflexHtmError, ValueError):
    """An operation was called outside its precondition (width mismatch, empty set, ...)."""


class EncoderRangeError(ReflexHtmError, ValueError):
    """Input lies outside the encoder range while clipping is disabled."""


class EncoderInputError(ReflexHtmError, ValueError):
    """Input is not a finite real."""


class CamAddressError(ReflexHtmError, IndexError):
    """CAM row address out of range or not holding a valid entry."""


class UndefinedScoreError(ReflexHtmError, ValueError):
    """Anomaly score requested against an empty actual SDR."""


class SnapshotError(ReflexHtmError):
    """Snapshot file is corrupted or carries an unsupported schema version."""


class DatasetError(ReflexHtmError, OSError):
    """Dataset could not be read or holds no usable values."""

    def __init__(self, path: str, reason: str):
        super().__init__(f"{path}: {reason}")
        self.path = path
        self.reason = reason
