"""Exception types shared across the package."""


class OffsetSpikeError(Exception):
    """Base class for errors raised by this package."""


class ShapeError(OffsetSpikeError, ValueError):
    """Array dimensions do not line up."""

    def __init__(self, message: str, layer: str | int | None = None):
        if layer is not None:
            message = f"layer {layer}: {message}"
        super().__init__(message)
        self.layer = layer


class NonFiniteError(OffsetSpikeError, ValueError):
    """NaN or inf found where finite values are required."""


class CalibrationError(OffsetSpikeError):
    """A requested membrane-potential shift cannot be applied."""


class GridError(OffsetSpikeError, ValueError):
    """An activation is off the QCFS grid (lambda != theta or T != L misuse)."""


class TrainingDiverged(OffsetSpikeError, RuntimeError):
    """The toy trainer produced a non-finite loss."""


class ModelFormatError(OffsetSpikeError, ValueError):
    """A model file is malformed or has an unsupported version."""
