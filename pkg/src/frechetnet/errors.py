"""Exception types raised across the package."""


class FrechetNetError(Exception):
    """Base class for all package errors."""


class ParameterError(FrechetNetError, ValueError):
    """A distribution or configuration parameter is outside its domain."""


class DimensionError(FrechetNetError, ValueError):
    """Array shapes or point dimensions do not agree."""


class SampleSizeError(FrechetNetError, ValueError):
    """Too few observations for the requested statistic."""


class ContractError(FrechetNetError, ValueError):
    """Inputs violate a documented precondition (e.g. weights not averaging to one)."""


class DegenerateCompositionError(FrechetNetError, ValueError):
    """A composition has no positive mass."""


class NumericError(FrechetNetError, ArithmeticError):
    """Non-finite values appeared where finite ones are required."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class SingularityError(FrechetNetError, ArithmeticError):
    """A symmetric factorization failed even after ridge stabilization."""

    def __init__(self, message, ridge):
        super().__init__(f"{message} (ridge={ridge:.3e})")
        self.ridge = ridge


class TrainingError(FrechetNetError, RuntimeError):
    """Training diverged."""

    def __init__(self, message, last_finite_epoch):
        super().__init__(f"{message} (last finite epoch: {last_finite_epoch})")
        self.last_finite_epoch = last_finite_epoch


class FormatError(FrechetNetError, ValueError):
    """A file on disk is malformed."""


class VersionError(FormatError):
    """A file on disk carries an unsupported format version."""
