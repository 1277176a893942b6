"""Exception hierarchy shared across the package.

Everything under DataError maps to CLI exit code 2 (bad or mismatched
input data); programming errors stay plain ValueError/TypeError.
"""


class NidsdlError(Exception):
    pass


class DataError(NidsdlError):
    """Input data is malformed, missing, or inconsistent with fitted state."""


class DataFormatError(DataError):
    """A record file violates the NSL-KDD line format."""

    def __init__(self, message, line_no=None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class UnseenCategoryError(DataError):
    """A categorical value was never observed while fitting the encoder."""

    def __init__(self, feature, value):
        super().__init__(f"unseen category for feature {feature!r}: {value!r}")
        self.feature = feature
        self.value = value


class ArtifactError(DataError):
    """A serialized model artifact is corrupt or structurally invalid."""


class UnsupportedVersionError(ArtifactError):
    """The artifact declares a format version this build cannot read."""


class DigestMismatchError(DataError):
    """Model artifact and encoder file do not belong to the same run."""


class TrainingDivergedError(DataError):
    """Training produced a non-finite loss or parameter."""
