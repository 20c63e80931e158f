class LatentAttrError(Exception):
    """Base class for package errors."""


class ShapeError(LatentAttrError, ValueError):
    pass


class InputError(LatentAttrError, ValueError):
    """Malformed or inconsistent user input (files, parameters)."""


class NumericalBlowupError(LatentAttrError, FloatingPointError):
    pass
