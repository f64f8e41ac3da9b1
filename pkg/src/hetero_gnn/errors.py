"""Exception hierarchy shared by every module."""


class HeteroGNNError(Exception):
    """Base class for all errors raised by hetero_gnn."""


class ShapeError(HeteroGNNError, ValueError):
    pass


class InvalidMatrix(HeteroGNNError, ValueError):
    pass


class UndefinedRatio(HeteroGNNError, ValueError):
    pass


class SplitError(HeteroGNNError, ValueError):
    pass


class FormatError(HeteroGNNError, ValueError):
    pass


class ValidationError(HeteroGNNError, ValueError):
    pass


class ParamError(HeteroGNNError, ValueError):
    pass


class TooLarge(HeteroGNNError, MemoryError):
    pass


class DegeneracyError(HeteroGNNError, ArithmeticError):
    pass


class NormError(HeteroGNNError, ArithmeticError):
    pass


class MaskError(HeteroGNNError, ValueError):
    pass


class TraceError(HeteroGNNError, RuntimeError):
    pass


class NumericsError(HeteroGNNError, ArithmeticError):
    pass


class ConfigError(HeteroGNNError, ValueError):
    pass
