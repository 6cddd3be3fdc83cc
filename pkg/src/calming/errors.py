"""Exception hierarchy shared across the package."""


class CalmingError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(CalmingError):
    """Inputs whose shapes violate an operation contract."""


class InvalidArgument(CalmingError):
    """Argument outside the documented domain (bad order, range, mode)."""


class NumericOverflow(CalmingError):
    """Non-finite value produced by a forward map or likelihood term.

    Carries the index of the first offending entry when known.
    """

    def __init__(self, msg, index=None):
        super().__init__(msg)
        self.index = index


class SingularMatrix(CalmingError):
    """Symmetric matrix not positive-definite enough to invert.

    Carries the offending minimum eigenvalue.
    """

    def __init__(self, msg, min_eig=None):
        super().__init__(msg)
        self.min_eig = min_eig


class ConcentrationUnverifiable(CalmingError):
    """Fixed point for the local radius left the admissible range rho <= 1/2.

    Carries the offending third-order smoothness estimate.
    """

    def __init__(self, msg, delta3=None, rho=None):
        super().__init__(msg)
        self.delta3 = delta3
        self.rho = rho


class SamplerStuck(CalmingError):
    """Metropolis chain accepted nothing after burn-in."""

    def __init__(self, msg, diagnostics=None):
        super().__init__(msg)
        self.diagnostics = diagnostics or {}


class DegenerateSpectrum(CalmingError):
    """Covariance spectrum too thin for the comparison bound (Lambda_2 = 0)."""


class BracketExhausted(CalmingError):
    """Root bracketing failed over the documented search interval."""


class TruncationExceeded(CalmingError):
    """Requested index exceeds the available coordinate budget."""


class ConfigError(CalmingError):
    """Configuration parse or validation failure.

    Carries the dotted path of the offending field.
    """

    def __init__(self, msg, field=None):
        super().__init__(msg)
        self.field = field
