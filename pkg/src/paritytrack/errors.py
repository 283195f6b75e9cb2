"""Exception types shared across the package.

Each error carries an ``exit_code`` so the command line front end can map
failures onto its documented exit statuses without a lookup table.
"""


class ParityTrackError(Exception):
    exit_code = 1


class ConfigError(ParityTrackError, ValueError):
    exit_code = 2


class InvalidDimensionError(ParityTrackError, ValueError):
    exit_code = 2


class TruncationError(ParityTrackError, ValueError):
    """Fock truncation too small for the requested state or operation."""

    exit_code = 2


class InvalidModelError(ParityTrackError, ValueError):
    exit_code = 2


class NumericalError(ParityTrackError, ArithmeticError):
    exit_code = 3


class NormalizationError(NumericalError):
    pass


class ImpossibleOutcomeError(NumericalError):
    """Observed outcome has (numerically) zero likelihood under the model."""


class StepSizeError(NumericalError):
    pass


class FitError(NumericalError):
    pass


class IndeterminateParityError(NumericalError):
    """Series never reaches either Schmitt threshold."""


class StageDependencyError(ParityTrackError):
    exit_code = 2


class ParseError(ParityTrackError, ValueError):
    exit_code = 2


class InconclusiveError(ParityTrackError):
    exit_code = 4
