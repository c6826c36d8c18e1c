"""Exception hierarchy shared across the pipeline.

CLI exit-code mapping: usage errors exit 1, DataError exits 2,
VerificationError (including checksum failures) exits 3.
"""


class AsrError(Exception):
    """Base class for all errors raised by this package."""


class DataError(AsrError):
    """Malformed or unusable input data (audio, manifests, config files)."""


class VerificationError(AsrError):
    """A numeric or integrity check failed."""


class ChecksumError(VerificationError):
    """Checkpoint payload does not match its recorded CRC."""
