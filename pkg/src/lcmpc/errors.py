"""Exception types shared across the toolkit."""


class LcmpcError(Exception):
    """Base class for all toolkit-specific errors."""


class UnboundedPolytopeError(LcmpcError):
    """A polytope required to be bounded turned out to be unbounded."""


class UnsupportedDimensionError(LcmpcError):
    """Vertex/hull computations are only implemented for the plane."""


class NoUniqueCycleError(LcmpcError):
    """The chosen input sequence does not generate a unique limit cycle
    (the one-period transition matrix has an eigenvalue at 1)."""


class InfeasibleCycleError(LcmpcError):
    """No admissible input sequence yields a constraint-satisfying cycle."""


class NotStabilizingError(LcmpcError):
    """The cycle's one-period transition matrix is not Schur stable, so no
    periodic quadratic certificate exists for the terminal law."""


class NoTubeError(LcmpcError):
    """Tube synthesis failed (empty set, lost interior, or infeasible
    conic program)."""


class TubeNotConvergedError(LcmpcError):
    """The polytopic tube recursion hit its iteration cap.

    Carries the last iterate in ``last_sets`` so callers can inspect or
    resume it.
    """

    def __init__(self, message, last_sets=None):
        super().__init__(message)
        self.last_sets = last_sets


class EnumerationBudgetError(LcmpcError):
    """An exhaustive enumeration would exceed the configured budget."""


class ConfigError(LcmpcError):
    """An experiment configuration failed schema or semantic validation.

    ``pointer`` holds a JSON-pointer-style path to the offending field.
    """

    def __init__(self, message, pointer=""):
        super().__init__(message)
        self.pointer = pointer


class VerificationError(LcmpcError):
    """A stored artifact failed re-verification."""
