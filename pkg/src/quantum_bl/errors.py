"""Exception types raised across the package."""


class QuantumBLError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(QuantumBLError, ValueError):
    pass


class NotPositiveDefinite(QuantumBLError, ValueError):
    pass


class NoConvergence(QuantumBLError, RuntimeError):
    pass


class NonFiniteObjective(QuantumBLError, FloatingPointError):
    pass


class UnsupportedSpec(QuantumBLError, ValueError):
    pass


class NoFeasibleState(QuantumBLError, ValueError):
    pass


class DegenerateSpectrum(QuantumBLError, ValueError):
    pass


class InvalidProbability(QuantumBLError, ValueError):
    pass


class SingleClassTraining(QuantumBLError, ValueError):
    pass


class InsufficientHistory(QuantumBLError, ValueError):
    pass


class InsufficientData(QuantumBLError, ValueError):
    pass


class NonPositiveVariance(QuantumBLError, ValueError):
    pass


class NonPositivePrice(QuantumBLError, ValueError):
    pass


class ZeroVariance(QuantumBLError, ValueError):
    pass


class AllZeroCaps(QuantumBLError, ValueError):
    pass


class DegenerateColumn(QuantumBLError, ValueError):
    pass


class ParseError(QuantumBLError, ValueError):
    """Malformed input file; message carries row/column when known."""


class MissingColumn(ParseError):
    pass
