"""Exception hierarchy shared by every mblab module."""


class MblabError(Exception):
    """Base class for all library errors."""


class NegativeEntry(MblabError, ValueError):
    def __init__(self, row, col, value):
        self.row, self.col, self.value = row, col, value
        super().__init__(f"negative transition probability {value!r} at ({row}, {col})")


class RowSumViolation(MblabError, ValueError):
    def __init__(self, row, deviation):
        self.row, self.deviation = row, deviation
        super().__init__(f"row {row} sums to 1{deviation:+.3g}")


class NotIrreducible(MblabError, ValueError):
    pass


class StructureUnsupported(MblabError, ValueError):
    pass


class NoConvergence(MblabError, RuntimeError):
    def __init__(self, message, residual=float("nan")):
        self.residual = residual
        super().__init__(f"{message} (residual {residual:.3g})")


class MeanOutOfRange(MblabError, ValueError):
    pass


class RewardsNotLatticed(MblabError, ValueError):
    pass


class StateSpaceTooLarge(MblabError, ValueError):
    pass


class InsufficientSamples(MblabError, ValueError):
    pass


class NoUniqueBest(MblabError, ValueError):
    pass


class SupportMismatch(MblabError, ValueError):
    pass


class Timeout(MblabError, RuntimeError):
    """Sample budget exhausted before the stopping rule fired."""

    def __init__(self, samples, seed=None):
        self.samples, self.seed = samples, seed
        super().__init__(f"no stop after {samples} samples (seed={seed})")


class ConfigError(MblabError):
    pass


class ParseError(ConfigError):
    pass


class ValidationError(ConfigError, ValueError):
    def __init__(self, field, reason):
        self.field, self.reason = field, reason
        super().__init__(f"{field}: {reason}")
