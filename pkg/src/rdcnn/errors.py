"""Exception hierarchy shared by every rdcnn module."""


class RdcnnError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(RdcnnError, ValueError):
    """Invalid parameters, specs or config files."""


class ShapeError(RdcnnError, ValueError):
    """Input too short or empty for the requested operation."""


class MeasurementError(RdcnnError, ValueError):
    """A quantity such as SNR is undefined for the given data."""


class StateError(RdcnnError, RuntimeError):
    """Operation not allowed in the object's current state."""


class TrainingError(RdcnnError, RuntimeError):
    """Gradient descent diverged."""

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class NumericalError(RdcnnError, ArithmeticError):
    """Ill-conditioned linear algebra."""


class InfeasibleError(RdcnnError, ValueError):
    """No candidate satisfies the constraints."""


class FormatError(RdcnnError, ValueError):
    """Malformed or corrupted file contents."""


class ContractError(RdcnnError, ValueError):
    """Caller violated a precondition (e.g. aggregating nothing)."""
