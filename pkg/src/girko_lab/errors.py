"""Exception hierarchy shared by every module of the package."""


class GirkoLabError(Exception):
    """Base class for all errors raised by girko_lab."""


class InvalidInput(GirkoLabError, ValueError):
    pass


class InvalidParameter(GirkoLabError, ValueError):
    pass


class DimensionMismatch(GirkoLabError, ValueError):
    pass


class IndexOutOfRange(GirkoLabError, IndexError):
    pass


class NumericalFailure(GirkoLabError, ArithmeticError):
    """A dense solver did not converge or produced non-finite output."""


class NonConvergence(NumericalFailure):
    pass


class DegenerateSpectrum(NumericalFailure):
    pass


class RankDeficient(NumericalFailure):
    pass


class SingularSystemError(NumericalFailure):
    pass


class NonUnitary(InvalidInput):
    pass


class ContourTooClose(InvalidInput):
    pass


class GridUnderflow(NumericalFailure):
    pass


class QuantileOutOfSupport(InvalidParameter):
    pass


class InsufficientData(GirkoLabError, ValueError):
    pass


class InsufficientSamples(InsufficientData):
    pass
