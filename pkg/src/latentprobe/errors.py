"""Exception hierarchy shared across the toolkit.

Every error carries an ``exit_code`` so the CLI can map failures onto its
documented exit statuses (1 validation, 2 I/O, 3 numerical).
"""


class LatentProbeError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class FormatError(LatentProbeError):
    """A file's structure does not match its declared format."""

    exit_code = 2


class UnsupportedFormatError(FormatError):
    """The file is well formed but uses an encoding we do not decode."""


class EmptyClipError(LatentProbeError):
    """An audio clip is silent or empty where content is required."""


class EmptyTrackError(LatentProbeError):
    """A clip is too short to yield even one analysis frame."""


class ParameterError(LatentProbeError):
    """An argument is outside its valid range for the given data."""


class ValidationError(LatentProbeError):
    """Input data violates a documented invariant."""


class JoinError(ValidationError):
    """Two datasets share no utterance ids."""


class UnderdeterminedError(ParameterError):
    """Too few rows to fit the requested regression."""


class NumericalError(LatentProbeError):
    """A numerical routine failed to converge or produced non-finite output."""

    exit_code = 3
