"""Exception hierarchy shared across the package.

Exit-code mapping used by the CLI: config/usage problems exit 2, data
problems exit 3, numerical failures exit 4.
"""


class SnvcError(Exception):
    """Base class for all package errors."""


# --- configuration / usage ------------------------------------------------

class ConfigInvalid(SnvcError):
    """A configuration value violates its documented bounds."""


# --- data ingestion -------------------------------------------------------

class DataError(SnvcError):
    """Base class for tabular-data problems."""


class MissingColumn(DataError):
    def __init__(self, column):
        super().__init__(f"designated column not found: {column!r}")
        self.column = column


class ParseError(DataError):
    def __init__(self, row, column, token):
        super().__init__(f"cannot parse {token!r} at row {row}, column {column!r}")
        self.row = row
        self.column = column
        self.token = token


class EmptyAfterFiltering(DataError):
    """No rows remain once missing/non-finite designated values are dropped."""


# --- geometry and bases ---------------------------------------------------

class AllSitesCoincident(SnvcError):
    """Every pairwise distance is zero; no spanning-tree range exists."""


class NonPositiveRange(SnvcError):
    """Proximity range must be strictly positive."""


class EmptyBasis(SnvcError):
    """Operation requires at least one retained eigenvector."""


class ConstantVector(SnvcError):
    """Moran coefficient undefined for a constant vector (z'Mz = 0)."""


class TooFewDistinctValues(SnvcError):
    """Covariate has too few distinct values to support the requested spline."""


class ConstantCovariate(SnvcError):
    """Covariate is constant; a non-spatial basis cannot be built from it."""


class DimensionMismatch(SnvcError):
    pass


# --- model assembly and estimation ----------------------------------------

class EmptySpatialBasis(SnvcError):
    """SVC term requested but the spatial basis has no retained eigenvector."""


class SingularFixedBlock(SnvcError):
    """X'X is rank-deficient; fixed effects are not identifiable."""


class NumericalBreakdown(SnvcError):
    """Factorization failed or a degenerate variance was encountered."""


class SingularLocalFit(SnvcError):
    """A site's weighted moment matrix is rank-deficient."""


class DegreesExhausted(SnvcError):
    """tr(S) >= N - 2, so the corrected AIC is undefined."""


class NoFeasibleBandwidth(SnvcError):
    """Every candidate bandwidth failed."""
