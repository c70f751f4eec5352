"""Error kinds raised by the library; the CLI maps them to exit codes."""

from __future__ import annotations


class OdxError(Exception):
    """Base class for every error raised by odx."""


class DimensionError(OdxError, ValueError):
    """Tensor or batch shapes do not fit the model or each other."""


class ConditioningError(OdxError, ValueError):
    """Class input missing, unexpected, or out of range."""


class ParameterError(OdxError, ValueError):
    """An operation precondition on a scalar parameter failed."""


class UnsupportedMomentError(ParameterError):
    """Moment order beyond what the prior supports."""


class SampleSizeError(ParameterError):
    """Sample too small or too large for a goodness-of-fit test."""


class ConfigurationError(OdxError, ValueError):
    """Invalid or inconsistent configuration."""


class FormatError(OdxError, ValueError):
    """Malformed file contents (GTC container, PPM/PGM, CSV)."""

    def __init__(self, message: str, offset: int | None = None) -> None:
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)


class NumericError(OdxError, ArithmeticError):
    """A computation produced non-finite values."""


class TrainingDivergedError(NumericError):
    """Adversarial training loss exploded or became non-finite."""
