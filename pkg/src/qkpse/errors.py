"""Exception types shared across the package."""


class QkpseError(Exception):
    pass


class PositiveDefiniteViolation(QkpseError, ValueError):
    pass


class SymmetryViolation(QkpseError, ValueError):
    pass


class PhysicalityViolation(QkpseError, ValueError):
    pass


class OrderingInfeasible(QkpseError, ValueError):
    pass


class CutoffError(QkpseError, ValueError):
    pass


class SingularConditioning(QkpseError, ValueError):
    pass


class NonConvergence(QkpseError, RuntimeError):
    pass


class RejectionStall(QkpseError, RuntimeError):
    pass


class GuardViolation(QkpseError, RuntimeError):
    """An estimated normalisation is too small for the ratio estimate."""


class BudgetExceeded(QkpseError, ValueError):
    pass


class TruncationWarning(UserWarning):
    pass


class RangeViolation(QkpseError, RuntimeError):
    """A sampled estimator value fell outside the declared range bound."""
