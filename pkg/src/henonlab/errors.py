"""Exception types shared across the package."""


class HenonLabError(Exception):
    """Base class for all errors raised by this package."""


class MapDefinitionError(HenonLabError):
    """A factor or composed map violates the normal-form requirements."""


class NotEscapingError(HenonLabError):
    """An operation needed a point of the escaping set and did not get one."""


class BudgetExhaustedError(HenonLabError):
    """An iteration budget ran out before the computation could settle."""


class ResonanceError(HenonLabError):
    """The homological equation for a manifold chart became ill conditioned.

    Raised when ``cond(DF_p - lam^k I)`` exceeds the safety threshold while
    solving for a series coefficient, which signals an eigenvalue near
    resonance.
    """


class ChartDomainError(HenonLabError):
    """A chart was evaluated or continued outside its usable domain."""


class PathEscapesError(ChartDomainError):
    """A continuation path left the escaping locus of the leaf."""


class BranchAmbiguityError(ChartDomainError):
    """Branch tracking could not pick a root unambiguously."""


class LoopMarginError(HenonLabError):
    """A charge loop came too close to the zero set of the potential."""
