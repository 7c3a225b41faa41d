"""Exception hierarchy shared by every module in the package."""


class KGEError(Exception):
    """Base class for all errors raised by kgrotate."""


class DatasetError(KGEError):
    pass


class MissingFile(DatasetError):
    pass


class UnknownSymbol(DatasetError):
    pass


class MalformedLine(DatasetError):
    pass


class EmptySplit(DatasetError):
    pass


class NotACountriesGraph(DatasetError):
    pass


class DimensionMismatch(KGEError, ValueError):
    pass


class NegativeModulus(KGEError, ValueError):
    pass


class IdOutOfRange(KGEError, IndexError):
    pass


class WrongModelKind(KGEError, ValueError):
    pass


class WeightMismatch(KGEError, ValueError):
    pass


class ShapeMismatch(KGEError, ValueError):
    pass


class Divergence(KGEError, FloatingPointError):
    pass


class CheckpointError(KGEError):
    pass


class VersionMismatch(CheckpointError):
    pass


class ChecksumMismatch(CheckpointError):
    pass


class ConfigError(KGEError, ValueError):
    pass


class UnknownKey(ConfigError):
    pass


class ParseError(ConfigError):
    pass
