"""Exception types shared across the package."""


class SalshiftError(Exception):
    """Base class for all package errors."""


class RangeError(SalshiftError):
    """A parameter value lies outside its legal closed range."""


class ShapeError(SalshiftError):
    """Image/mask/map dimensions are inconsistent."""


class MaskError(SalshiftError):
    """The binarized mask is empty (or full where a proper subset is required)."""


class NumericError(SalshiftError):
    """A computation produced non-finite values."""


class InputTooSmallError(SalshiftError):
    """The input image is below the minimum working size."""


class DegenerateInputError(SalshiftError):
    """An input has zero variance where a correlation is requested."""


class ProviderError(SalshiftError):
    """An external saliency/fidelity provider timed out or violated the protocol."""


class ImageFormatError(SalshiftError):
    """An image file could not be read or uses an unsupported encoding."""


class RecipeFormatError(SalshiftError):
    """A recipe document is malformed, out of range, or carries unknown fields."""


class VideoError(SalshiftError):
    """A frame sequence could not be processed; carries the failing index."""
