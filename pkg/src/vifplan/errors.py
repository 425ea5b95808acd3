"""Semantic exception hierarchy shared across the package.

Every error raised on a contract violation derives from VifplanError so
callers (and the CLI) can distinguish library-domain failures from plain
programming errors.
"""


class VifplanError(Exception):
    """Base class for all vifplan errors."""


# -- linear algebra ---------------------------------------------------------

class NotPositiveDefinite(VifplanError):
    """A pivot fell below the relative tolerance during factorization."""


class NotPositiveSemiDefinite(VifplanError):
    """A covariance matrix is not PSD even after diagonal jitter."""


class DegenerateResponse(VifplanError):
    """A response/residual has zero variation where variation is required."""


# -- dataset ingestion and model handling -----------------------------------

class SchemaMismatch(VifplanError):
    """Unknown column, unparseable value, or value outside declared labels."""


class NotTwoArms(VifplanError):
    """The treatment column does not carry exactly two distinct labels."""


class EmptyDataset(VifplanError):
    """No usable subjects remain after ingestion."""


class ConstantColumn(VifplanError):
    """A covariate takes a single value; its centered column is all zero."""


class TooManyCovariates(VifplanError):
    """Model enumeration guard against the 2^k explosion."""


class CategoricalUnsupported(VifplanError):
    """Operation requires numerically codable (continuous/binary) covariates."""


# -- VIF computation ---------------------------------------------------------

class CompleteConfounding(VifplanError):
    """Treatment is perfectly predictable from the covariates (R^2 = 1)."""


class RankDeficient(VifplanError):
    """Operation requires a full-rank design matrix."""


class NotCategorical(VifplanError):
    """Contingency-table construction needs a binary/categorical covariate."""


class EmptyMargin(VifplanError):
    """A contingency table margin is zero."""


# -- theory calculators ------------------------------------------------------

class DomainError(VifplanError):
    """Arguments outside the validity domain of a closed-form expression."""


# -- simulation engine -------------------------------------------------------

class TooManyRedraws(VifplanError):
    """A simulation cell dropped more than 1% of its replicates."""
