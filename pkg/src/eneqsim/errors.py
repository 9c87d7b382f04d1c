"""Shared exception types.

The CLI maps these onto exit codes: ValidationError and subclasses exit 2,
NumericError and subclasses exit 3. Fit non-convergence is not an exception
(fitters return a flagged result); the CLI exits 4 on it.
"""


class ValidationError(ValueError):
    """Bad parameter, config value, or input file."""


class CalibrationError(ValidationError):
    """Calibration impossible, e.g. zero dipole matrix element."""


class ResonanceError(ValidationError):
    """A qubit transition is exactly resonant with the resonator."""


class NumericError(RuntimeError):
    """A solver or propagation step failed."""


class NoCrossingError(NumericError):
    """The qubit line never crosses the resonator in the swept range."""
