"""Exception types raised by the library.

Every error carries a stable ``name`` so the CLI can report it verbatim.
"""


class AILimitError(Exception):
    """Base class for all domain errors."""

    @property
    def name(self) -> str:
        return type(self).__name__


# relation
class NegativeRadicand(AILimitError):
    pass


class DegenerateBranch(AILimitError):
    pass


class DivisionByZero(AILimitError):
    pass


class NoPreimage(AILimitError):
    pass


class NotOnRelation(AILimitError):
    pass


class InvalidBranch(AILimitError, ValueError):
    pass


# symbolic
class EscapedTrappingSet(AILimitError):
    pass


class EscapedDomain(AILimitError):
    pass


class CriticalPointProximity(AILimitError):
    pass


class NoConvergence(AILimitError):
    pass


# hyperbolicity
class InfiniteOrZeroSlope(AILimitError):
    pass


class NotHyperbolic(AILimitError):
    pass


class SingularMatrix(AILimitError):
    pass


# continuation
class SingularJacobian(AILimitError):
    pass


class StepTooLarge(NoConvergence):
    """Newton update beyond the divergence cap; a form of non-convergence."""


class StepUnderflow(AILimitError):
    pass


class ZeroEpsilon(AILimitError):
    pass


class DegenerateElimination(AILimitError):
    pass


# map3d
class ZeroDelta(AILimitError):
    pass


class NotPeriodic(AILimitError):
    pass
