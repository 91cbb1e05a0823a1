"""Exception hierarchy shared by all modules."""


class HHError(Exception):
    """Base class for every error raised by hhed."""


class ModelError(HHError, ValueError):
    pass


class AsymmetricMatrix(ModelError):
    pass


class NonPositiveOmega(ModelError):
    pass


class SameSublatticeHopping(ModelError):
    pass


class DisconnectedLattice(ModelError):
    pass


class OddCycle(ModelError):
    pass


class NonRealResult(ModelError):
    pass


class EmptySector(HHError, ValueError):
    pass


class SectorMismatch(HHError, ValueError):
    pass


class DimensionTooLarge(HHError, ValueError):
    pass


class NotHermitian(HHError, ValueError):
    pass


class NoConvergence(HHError, RuntimeError):
    pass


class PreconditionFailed(HHError):
    pass


class Unconverged(HHError):
    pass


class ParseError(HHError, ValueError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{where}")


class ValidationError(HHError, ValueError):
    def __init__(self, message, field=None):
        self.field = field
        super().__init__(message)
