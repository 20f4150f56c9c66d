"""Exception hierarchy shared across the package."""


class ProtofuseError(Exception):
    """Base class for all package errors."""


class SchemaError(ProtofuseError):
    """Record or tensor violates the declared schema (dimensions, labels, ids)."""


class ParseError(ProtofuseError):
    """File could not be parsed; carries the offending line number."""

    def __init__(self, message, line_no=None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class CalibrationDegenerateError(ProtofuseError):
    """Calibration scores contain a non-positive entry (broken calibration query)."""


class NumericsError(ProtofuseError):
    """NaN/Inf encountered where finite values are required."""


class MissingClassError(ProtofuseError):
    """A class has no (or too few) training records."""


class ConfigError(ProtofuseError):
    """Invalid configuration value."""
