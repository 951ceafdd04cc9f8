"""Exception hierarchy shared across the package."""


class KslabError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(KslabError):
    """A parameter, config file or call violated a documented invariant."""


class DomainError(KslabError):
    """A function was evaluated outside its mathematical domain."""


class QuadratureError(KslabError):
    """Adaptive quadrature failed to meet its tolerance within the depth cap."""


class AdmissibilityError(KslabError):
    """Parameter search failed: no admissible pair, empty interval, or a
    ladder that does not verify/terminate."""


class SolverError(KslabError):
    """Base class for time-stepping failures."""


class LinearSolverError(SolverError):
    """Conjugate gradient failed to reach the requested residual."""


class DtUnderflowError(SolverError):
    """The stability-limited step size fell below dt_min (blow-up signal)."""
