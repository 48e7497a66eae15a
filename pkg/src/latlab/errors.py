"""Exception hierarchy shared by every latlab module."""


class LatlabError(Exception):
    """Base class for all latlab failures."""


class InvalidArgumentError(LatlabError, ValueError):
    pass


class DecompositionError(LatlabError):
    """The local H^- H^0 H decomposition is undefined (singular top-left block)."""


class RankError(LatlabError):
    pass


class BudgetError(LatlabError):
    """An enumeration exceeded its node budget.

    ``best`` carries the best value found before the budget ran out, when
    one is meaningful (e.g. the shortest norm seen so far).
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class PreconditionError(LatlabError):
    pass


class SupportError(LatlabError):
    pass


class AccuracyError(LatlabError):
    """Quadrature refinements disagree by more than the certification tolerance."""

    def __init__(self, message, values=()):
        super().__init__(message)
        self.values = tuple(values)


class HypothesisError(LatlabError):
    pass


class InsufficientDataError(LatlabError):
    pass


class DegenerateFunctionError(LatlabError):
    pass
