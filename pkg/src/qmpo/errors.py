"""Exception hierarchy for the qmpo package."""


class QmpoError(Exception):
    """Base class for every error raised by qmpo."""


class DimensionError(QmpoError, ValueError):
    """Array shapes do not fit together."""


class AsymmetricMatrixError(QmpoError, ValueError):
    pass


class SingularMatrixError(QmpoError, ValueError):
    pass


class ContractError(QmpoError, RuntimeError):
    """An operation was called outside of its precondition."""


class DegenerateProblemError(QmpoError, ValueError):
    """G = 0: the problem is a pure eigenvalue problem.

    Solve it with :func:`qmpo.rtr.rtr_solve` on a zero linear term, which
    takes the direct eigensolver path.
    """


class UndefinedMetricError(QmpoError, ValueError):
    pass


class AssumptionError(QmpoError, ValueError):
    """A hypothesis needed by a convergence bound does not hold numerically."""


class GraphDegeneracyError(QmpoError, ValueError):
    pass


class SplitError(QmpoError, ValueError):
    """Random train split is unusable (e.g. only one class was drawn)."""


class MatrixMarketError(QmpoError, ValueError):
    """Malformed Matrix Market input; ``lineno`` is 1-based."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class MatrixMarketHeaderError(MatrixMarketError):
    pass


class MatrixMarketIndexError(MatrixMarketError):
    pass


class MatrixMarketFieldError(MatrixMarketError):
    pass
