"""Exception hierarchy for fracwave."""


class FracWaveError(Exception):
    """Base class for all fracwave errors."""


class InvalidGrid(FracWaveError, ValueError):
    pass


class NonFinite(FracWaveError, ValueError):
    pass


class GridMismatch(FracWaveError, ValueError):
    pass


class InvalidP(FracWaveError, ValueError):
    pass


class OrderTooLarge(FracWaveError, ValueError):
    pass


class UnderResolved(FracWaveError, ValueError):
    pass


class EpsilonUnderResolved(FracWaveError, ValueError):
    pass


class NegativeBase(FracWaveError, ValueError):
    pass


class NegativeCoefficient(FracWaveError, ValueError):
    pass


class DegenerateFit(FracWaveError, ValueError):
    pass


class QuadratureUnderResolved(FracWaveError, ValueError):
    pass


class InvalidTimeStep(FracWaveError, ValueError):
    pass


class CFLViolation(InvalidTimeStep):
    pass


class Unstable(FracWaveError, RuntimeError):
    pass


class ConfigError(FracWaveError, ValueError):
    pass


class FormatError(FracWaveError, ValueError):
    pass
