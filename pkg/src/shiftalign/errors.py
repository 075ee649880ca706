"""Exception taxonomy shared across the library.

The CLI maps these onto stable exit codes: configuration and input
problems exit 2, filesystem problems exit 3, numerical or degenerate
data problems exit 4.
"""


class ShiftAlignError(Exception):
    """Base class for all library errors."""


class InputError(ShiftAlignError):
    """Invalid argument or configuration value."""


class FormatError(InputError):
    """A file exists but is not in the expected format."""


class ParseError(FormatError):
    """Unparseable cell or token; message carries row/column context."""


class InsufficientDataError(InputError):
    """Fewer curves or samples than the operation requires."""


class PartitionError(InputError):
    """Curves cannot be partitioned into equal blocks as requested."""


class GridError(InputError):
    """Frequency grid incompatible with the curve length."""


class AssumptionError(InputError):
    """Scenario violates the support assumptions (pulse and shifts must fit in one period)."""


class NumericalError(ShiftAlignError):
    """Numerical failure: non-finite values, divergence, or ill-posed data."""


class DegenerateSampleError(NumericalError):
    """Sample has no spread; bandwidth selection is impossible."""


class DegenerateLandmarkError(NumericalError):
    """A curve has no usable landmark (e.g. constant signal)."""


class NoSpikeError(NumericalError):
    """Excitable-membrane stimulus did not elicit an action potential."""


class EmptySegmentationError(NumericalError):
    """No segment satisfied the peak-detection rules."""
