"""Exception hierarchy shared by all btdet modules."""


class BtdetError(Exception):
    """Base class for all library errors."""


class DimensionError(BtdetError, ValueError):
    """Shapes are incompatible with the requested operation."""


class SingularityError(BtdetError):
    """A matrix that must be inverted is singular to working tolerance."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class SpectralPointError(SingularityError):
    """The spectral parameter hits (or is numerically at) a spectral point."""


class StencilError(SpectralPointError):
    """A finite-difference stencil touches a pole or zero."""


class ZeroCrossingError(BtdetError):
    """A determinant vanishes on a path that should avoid its zeros."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class RefinementNeeded(BtdetError):
    """Consecutive phase increments are too large to unwrap safely."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class DomainError(BtdetError, ValueError):
    """Argument outside the domain of the function (e.g. on a branch cut)."""


class StiffnessError(BtdetError):
    """The adaptive integrator could not advance."""

    def __init__(self, message, suggested_cap=None):
        super().__init__(message)
        self.suggested_cap = suggested_cap


class ConvergenceError(BtdetError):
    """An iteration failed to reach its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ContractError(BtdetError, ValueError):
    """Input violates a documented precondition."""


class ClassificationError(ContractError):
    """Boundary operator has the wrong class (selfadjoint, dissipative, ...)."""


class CoverageError(BtdetError):
    """A real grid is too short for the requested quadrature."""

    def __init__(self, message, suggested_window=None):
        super().__init__(message)
        self.suggested_window = suggested_window


class InconclusiveError(BtdetError):
    """A winding number could not be certified."""


class ResolutionError(ContractError):
    """Discretization too coarse."""
