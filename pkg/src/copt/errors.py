"""Exception and warning types shared across the package."""


class CoptError(ValueError):
    """Base class for all errors raised by this package."""


# graph validation
class InvalidGraph(CoptError):
    pass


class NotConnected(InvalidGraph):
    pass


class SelfLoop(InvalidGraph):
    pass


class DuplicateEdge(InvalidGraph):
    pass


class NonPositiveWeight(InvalidGraph):
    pass


class VertexOutOfRange(InvalidGraph):
    pass


# linear algebra
class SingularBeyondOnes(CoptError):
    """Laplacian has more than one zero eigenvalue (disconnected graph)."""


class KTooLarge(CoptError):
    pass


class NotPSD(CoptError):
    pass


class DimensionMismatch(CoptError):
    pass


class ZeroLine(CoptError):
    """A row or column of a matrix handed to Sinkhorn is entirely zero."""


class NotSquare(CoptError):
    pass


# generators and corruption
class Unachievable(CoptError):
    pass


class ConnectivityFailure(CoptError):
    pass


class CannotStayConnected(CoptError):
    pass


# scoring and retrieval
class LabelSetMismatch(CoptError):
    pass


class DimMismatch(CoptError):
    pass


class EmptyDataset(CoptError):
    pass


class DegenerateSketchSize(CoptError):
    pass


class SingularSketch(UserWarning):
    """The sketched Laplacian came out disconnected."""


class EmptySummary(UserWarning):
    """Thresholding removed every edge of a summary graph."""
