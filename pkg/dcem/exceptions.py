"""Exceptions raised by the DCEM library.

Management commands catch ``DCEMError`` and turn it into ``CommandError``.
"""


class DCEMError(Exception):
    """Base class for every error raised by this package."""


class InfeasibleConfig(DCEMError, ValueError):
    """A configuration value is out of range or implies impossible rates."""


class CalibrationError(DCEMError):
    """Bisection could not hit a target rate."""

    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket


class DimensionMismatch(DCEMError, ValueError):
    pass


class TrainingError(DCEMError):
    """Empty training data or a non-finite loss."""


class DegenerateLabels(DCEMError, ValueError):
    """Labels (or test indicators) contain a single class."""


class EStepViolation(DCEMError):
    """A tested example received a pseudo-label different from its observed label."""


class ConfigError(DCEMError):
    """A sweep file or result CSV failed to parse or validate."""


class TheoryCheckFailed(DCEMError):
    def __init__(self, check, detail=''):
        super().__init__(f"{check} failed: {detail}" if detail else f"{check} failed")
        self.check = check
