"""Exception hierarchy shared by all modules."""


class MultiscaleError(Exception):
    """Base class for every error raised by this package."""


class InputError(MultiscaleError, ValueError):
    """Malformed or out-of-range arguments."""


class UnsupportedFeatureError(MultiscaleError, NotImplementedError):
    pass


class NumericalError(MultiscaleError):
    """Base class for failures of a numerical stage (CLI exit code 3)."""


class SolverError(NumericalError):
    """A linear solve did not meet its residual contract."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class PencilError(NumericalError):
    """The mass matrix of a generalized eigenproblem is not positive definite."""


class CoverageError(NumericalError):
    """Neighborhoods fail to cover the domain."""

    def __init__(self, message, uncovered=()):
        super().__init__(message)
        self.uncovered = tuple(int(c) for c in uncovered)


class SpaceConstructionError(NumericalError):
    """The multiscale space is rank deficient."""

    def __init__(self, message, rows=()):
        super().__init__(message)
        self.rows = tuple(rows)


class ConfigError(MultiscaleError, ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key
