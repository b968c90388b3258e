"""Exception hierarchy shared by every qtraj module."""


class QtrajError(Exception):
    """Base class for all errors raised by qtraj."""


class InvalidDimensionError(QtrajError, ValueError):
    """Requested Hilbert-space truncation is too small."""


class ShapeError(QtrajError, ValueError):
    """Operands have incompatible shapes."""


class ConfigurationError(QtrajError, ValueError):
    """A model or run configuration violates its contract."""


class IntegrationDivergedError(QtrajError, ArithmeticError):
    """A state left the physical set by more than the hard-fail threshold."""


class ImpossibleJumpError(QtrajError, ArithmeticError):
    """A photocount was applied to a state with (numerically) zero jump rate."""


class OracleMismatchError(QtrajError, AssertionError):
    """The closed-form commutativity check disagreed with the Ito oracle."""

    def __init__(self, message, instance=None):
        super().__init__(message)
        self.instance = instance
