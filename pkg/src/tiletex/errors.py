"""Exception hierarchy shared by every tiletex module."""


class TiletexError(Exception):
    """Base class for all tiletex failures."""


# ---- stack I/O ----

class FileMissing(TiletexError):
    pass


class DimensionMismatch(TiletexError):
    pass


class UnsupportedFormat(TiletexError):
    pass


class CropTooLarge(TiletexError):
    pass


class DegenerateCrop(TiletexError):
    pass


# ---- networks ----

class InvalidConfig(TiletexError):
    pass


class SizeNotDivisible(TiletexError):
    pass


class InvalidSplitLevel(TiletexError):
    pass


class InputTooSmall(TiletexError):
    pass


# ---- losses / metrics ----

class ShapeMismatch(TiletexError):
    pass


class ExtractorUnavailable(TiletexError):
    pass


class ShiftTooLarge(TiletexError):
    pass


# ---- tileability / sampler ----

class MapTooSmall(TiletexError):
    pass


class CropRangeInvalid(TiletexError):
    pass


# ---- trainer ----

class StackTooSmall(TiletexError):
    pass


# ---- cli ----

class MissingCheckpoint(TiletexError):
    pass
