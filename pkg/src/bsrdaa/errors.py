"""Exception hierarchy shared by every bsrdaa module."""


class BSRDAAError(Exception):
    """Base class for all errors raised by this package."""


class GeometryError(BSRDAAError, ValueError):
    pass


class PassivityError(BSRDAAError, ValueError):
    pass


class NumericalError(BSRDAAError, ArithmeticError):
    pass


class ZeroVectorError(BSRDAAError, ValueError):
    pass


class RankError(BSRDAAError, ValueError):
    pass


class ParseError(BSRDAAError, ValueError):
    """Raised for malformed channel or config files.

    ``line`` and ``field`` carry diagnostics when known.
    """

    def __init__(self, message, line=None, field=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.line = line
        self.field = field


class DimensionError(BSRDAAError, ValueError):
    pass


class DivergenceError(BSRDAAError, OverflowError):
    """The loop state left the representable range (unstable loop)."""


class InsufficientDataError(BSRDAAError, ValueError):
    pass


class DegenerateRegressionError(BSRDAAError, ValueError):
    pass


class UnderdampedError(BSRDAAError, ValueError):
    pass


class NonOverdampedError(BSRDAAError, ValueError):
    pass


class NoExtremumError(BSRDAAError, ValueError):
    pass


class StepSizeError(BSRDAAError, ValueError):
    pass


class NyquistError(BSRDAAError, ValueError):
    pass


class BudgetError(BSRDAAError, RuntimeError):
    pass


class ConfigError(BSRDAAError, ValueError):
    """Invalid scenario configuration; ``path`` names the offending field."""

    def __init__(self, message, path=None):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class FeatureDisabledError(ConfigError):
    pass


class AggressiveDesignWarning(UserWarning):
    """Controller design whose settling time is too close to the loop time."""
