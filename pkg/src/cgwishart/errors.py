"""Exception hierarchy shared by all modules."""


class CGWishartError(Exception):
    """Base class for every error raised by this package."""


class GraphError(CGWishartError, ValueError):
    pass


class OverlappingClasses(GraphError):
    pass


class UncoveredElement(GraphError):
    pass


class SelfLoop(GraphError):
    pass


class DuplicateEdge(GraphError):
    pass


class NotATree(GraphError):
    pass


class DimensionMismatch(CGWishartError, ValueError):
    pass


class NonpositiveDiagonal(CGWishartError, ArithmeticError):
    """A completed Cholesky diagonal has a nonpositive radicand."""


class UnsupportedOrder(CGWishartError, ValueError):
    pass


class QuadratureFailure(CGWishartError, ArithmeticError):
    pass


class SeriesDiverged(CGWishartError, ArithmeticError):
    pass


class TermCapExceeded(CGWishartError, ArithmeticError):
    pass


class PatternMismatch(CGWishartError, ValueError):
    """A matrix or graph does not follow the pattern a family requires."""


class NotInDualCone(CGWishartError, ValueError):
    pass


class StepTooLarge(CGWishartError, ArithmeticError):
    pass


class DegenerateEnvelope(CGWishartError, ArithmeticError):
    pass


class DNotPositiveDefinite(CGWishartError, ValueError):
    pass


class InitFailed(CGWishartError, RuntimeError):
    pass


class InvalidDoF(CGWishartError, ValueError):
    pass


class PosteriorScaleNotPD(CGWishartError, ValueError):
    pass


class ZeroReference(CGWishartError, ValueError):
    pass


class ConstantSeries(CGWishartError, ValueError):
    pass


class BadBatchCount(CGWishartError, ValueError):
    pass


class UnknownFixture(CGWishartError, KeyError):
    pass


class KNotPD(CGWishartError, ValueError):
    pass
