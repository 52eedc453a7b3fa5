"""Exception hierarchy shared by all rssh modules.

Distinguishing error kinds matters here because the CLI maps them onto
exit codes (see ``rssh.cli``) and tests assert on specific classes.
"""


class RsshError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(RsshError, ValueError):
    """Shapes are inconsistent, or a requested rank exceeds what the input supports."""


class ZeroMatrixError(RsshError, ValueError):
    """All columns of the input are numerically zero; no basis can be extracted."""


class ConvergenceError(RsshError, RuntimeError):
    """An iterative routine hit its iteration cap before reaching tolerance."""


class InvalidParamsError(RsshError, ValueError):
    """A parameter block violates its documented constraints."""


class UndefinedMetricError(RsshError, ZeroDivisionError):
    """A metric's denominator is zero for the given counts."""


class MissingLabelError(RsshError, KeyError):
    """A point id has no entry in the label map."""


class GenerationTimeoutError(RsshError, RuntimeError):
    """Rejection sampling exceeded its attempt budget; the requested instance
    geometry is infeasible."""


class EmptyModelError(RsshError, ValueError):
    """The index model contains no levels."""


class DatasetError(RsshError, ValueError):
    """Base class for dataset ingestion failures."""


class MalformedFileError(DatasetError):
    """File does not parse under the declared format. Carries byte offset when known."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class DimensionInconsistencyError(DatasetError):
    """Per-record dimensions disagree within one file."""


class EmptyDatasetError(DatasetError):
    """File parsed but contains no points."""


class IndexFileError(RsshError, ValueError):
    """Base class for index (de)serialization failures."""


class BadMagicError(IndexFileError):
    """File does not start with the expected magic bytes."""


class UnsupportedVersionError(IndexFileError):
    """Index file version is not supported by this build."""


class TruncatedFileError(IndexFileError):
    """File ended before the declared payload was read."""


class ChecksumError(IndexFileError):
    """Body checksum does not match the stored CRC-32."""
