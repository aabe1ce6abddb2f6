"""Exception hierarchy shared across the package.

Two families matter for callers: ``DataError`` (bad or unusable input,
CLI exit code 2) and ``SolverError`` (the optimization machinery failed,
CLI exit code 3).
"""


class FrontierbenchError(Exception):
    """Base class for every error raised by this package."""


class DataError(FrontierbenchError):
    """Invalid input data or an unsatisfiable request."""


class NonPositiveValue(DataError):
    """An input or output component is zero or negative."""


class DimensionMismatch(DataError):
    """Vectors or records disagree on the number of inputs/outputs."""


class DuplicateId(DataError):
    """Two unit records share the same id."""


class TooFewUnits(DataError):
    """A dataset needs at least two units to span a frontier."""


class DominanceViolation(DataError):
    """A gap was requested between points that are not ordered by dominance."""


class LevelMismatch(DataError):
    """A unit was passed to an operation meant for a different performance level."""


class EmptyStratum(DataError):
    """Peeling exhausted the units before reaching the requested depth."""


class TooLarge(DataError):
    """Instance exceeds the hard cap of the brute-force certification path."""


class MalformedHeader(DataError):
    """CSV header does not follow the ``id,in:<name>,...,out:<name>,...`` schema."""


class ParseError(DataError):
    """A CSV cell could not be parsed; carries row/column location."""

    def __init__(self, message: str, row: int | None = None, column: int | None = None):
        loc = ""
        if row is not None:
            loc = f" (row {row}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + loc)
        self.row = row
        self.column = column


class SolverError(FrontierbenchError):
    """The optimization machinery failed to produce a trustworthy answer."""


class NumericalFailure(SolverError):
    """Simplex could not resolve the instance within its numerical safeguards."""


class NodeLimitExceeded(SolverError):
    """Branch-and-bound hit its node cap before proving optimality."""


class SolverFailure(SolverError):
    """A model that must be solvable came back infeasible or inconsistent."""
