"""Exception hierarchy shared by all modules."""


class MdivifError(Exception):
    """Base class for errors raised by this package."""

    code = "error"


class InvalidParameterError(MdivifError, ValueError):
    """Parameter vector outside the model's valid region."""

    code = "invalid-parameter"


class QuadratureError(MdivifError, ArithmeticError):
    """Integration failed: tolerance not met or non-finite integrand."""

    code = "quadrature-failure"

    def __init__(self, message, x=None):
        super().__init__(message)
        self.x = x


class KernelInapplicableError(MdivifError):
    """Divergence kernel cannot be evaluated against the requested true distribution."""

    code = "kernel-inapplicable"


class ConvergenceError(MdivifError):
    """An iterative solver did not meet its tolerance."""

    code = "non-convergence"

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class ConstraintError(MdivifError):
    """Constraint is infeasible, rank deficient, or lacks a usable route."""

    code = "constraint-error"


class RankDeficiencyError(ConstraintError):
    """H(theta) has rank below the declared number of restrictions."""

    code = "rank-deficient"


class SingularSystemError(MdivifError, ArithmeticError):
    """A linear system needed for an influence function is singular."""

    code = "singular-system"


class ExtrapolationError(MdivifError):
    """Richardson extrapolation on an epsilon ladder did not behave."""

    code = "extrapolation-divergence"
