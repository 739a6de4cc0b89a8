"""Exception types shared across the package."""


class CrossdynError(Exception):
    """Base class for all crossdyn errors."""

    code = "ERROR"


class DegenerateData(CrossdynError):
    """Input data has no usable dispersion (e.g. all values identical)."""

    code = "DEGENERATE_DATA"


class NoAttractorFound(CrossdynError):
    """No downhill-to-uphill force sign change inside the scanned range."""

    code = "NO_ATTRACTOR"


class EmptyRow(CrossdynError):
    """A transition-matrix row has no grid point inside its noise window."""

    code = "EMPTY_ROW"


class NoConvergence(CrossdynError):
    """Power iteration did not reach the requested tolerance."""

    code = "NO_CONVERGENCE"


class NegativeRadicand(CrossdynError):
    """Quadrature produced a squared quantity below the negative tolerance."""

    code = "NEGATIVE_RADICAND"


class EmptyCohort(CrossdynError):
    """No individual left after filtering; nothing to score."""

    code = "EMPTY_COHORT"


class DegenerateScale(CrossdynError):
    """Accuracy rescaling undefined because the ceiling is at or below the null."""

    code = "DEGENERATE_SCALE"


class ParseError(CrossdynError):
    """Malformed input file; message carries row/column diagnostics."""

    code = "PARSE_ERROR"


class SchemaError(CrossdynError):
    """Model file has an unknown schema version or missing fields."""

    code = "SCHEMA_ERROR"


class BoundaryOptimumWarning(UserWarning):
    """Fitted value landed within 1% of a search bound; widen the bracket."""
