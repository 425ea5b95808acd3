"""Observed variance inflation factors by equivalent routes.

lambda = 1/(1 - R^2_Z), where R^2_Z is the coefficient of determination
from regressing the treatment indicator on the centered covariates. The
same number is reachable through a quadratic form in the between-arm mean
differences, through the two-sample multivariate distance (Rao's F), and,
for a single categorical covariate, through the chi-square statistic of
the 2 x L treatment-by-category table. All routes are pure functions of
immutable inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from . import linalg
from .dataset import Binary, Categorical, Dataset, DesignMatrix
from .errors import (
    CompleteConfounding,
    DegenerateResponse,
    EmptyMargin,
    NotCategorical,
    NotPositiveDefinite,
    RankDeficient,
)

# R^2 at or above this is treated as complete confounding (lambda unbounded).
CONFOUNDING_RSQ = 1.0 - 1e-10


class Route(Enum):
    REGRESSION = "regression"
    QUADRATIC_FORM = "quadratic"
    CHI_SQUARE = "chi2"


@dataclass(frozen=True)
class VifResult:
    lambda_: float
    r_squared_z: float
    n1: int
    n2: int
    k: int
    route: Route


def _split_arms(treatment: Sequence) -> tuple[np.ndarray, int, int]:
    """0/1 indicator (first-seen arm = 0) plus arm sizes."""
    labels = list(dict.fromkeys(treatment))
    if len(labels) != 2:
        raise ValueError(f"expected exactly two arms, found {len(labels)}")
    z = np.fromiter((0.0 if t == labels[0] else 1.0 for t in treatment),
                    dtype=float, count=len(treatment))
    n2 = int(z.sum())
    return z, len(treatment) - n2, n2


def vif_regression(design: DesignMatrix, treatment: Sequence) -> VifResult:
    """VIF from regressing the treatment indicator on the centered design.

    Handles rank-deficient designs through the pivoted fit: only the
    column space matters. k = 0 returns lambda = 1 exactly.
    """
    z, n1, n2 = _split_arms(treatment)
    if design.matrix.shape[0] != z.size:
        raise ValueError("design and treatment lengths differ")
    if design.k == 0:
        return VifResult(1.0, 0.0, n1, n2, 0, Route.REGRESSION)
    x = np.column_stack([np.ones(z.size), design.matrix])
    fit = linalg.least_squares(x, z, center_y=True)
    r2 = fit.r_squared
    if r2 >= CONFOUNDING_RSQ:
        raise CompleteConfounding(f"R^2_Z = {r2:.15g}; treatment is predictable from covariates")
    return VifResult(1.0 / (1.0 - r2), r2, n1, n2, design.k, Route.REGRESSION)


def vif_quadratic(design: DesignMatrix, treatment: Sequence) -> VifResult:
    """VIF via 1/lambda = 1 - (n1 n2 / N) D' (X'X)^{-1} D.

    D is the between-arm covariate mean-difference vector and X the
    centered design; requires full column rank.
    """
    z, n1, n2 = _split_arms(treatment)
    x = design.matrix
    if x.shape[0] != z.size:
        raise ValueError("design and treatment lengths differ")
    if design.k < 1:
        raise ValueError("quadratic-form route needs k >= 1")
    if design.rank < design.k:
        raise RankDeficient(
            f"design rank {design.rank} < k = {design.k}; use vif_regression instead"
        )
    n = z.size
    diff = x[z == 0.0].mean(axis=0) - x[z == 1.0].mean(axis=0)
    gram = x.T @ x
    try:
        quad = float(diff @ linalg.solve_spd(gram, diff))
    except NotPositiveDefinite as e:
        raise RankDeficient(f"X'X not positive definite: {e}") from e
    r2 = max(0.0, (n1 * n2 / n) * quad)
    if r2 >= CONFOUNDING_RSQ:
        raise CompleteConfounding(f"R^2_Z = {r2:.15g} via quadratic form")
    return VifResult(1.0 / (1.0 - r2), r2, n1, n2, design.k, Route.QUADRATIC_FORM)


# ---------------------------------------------------------------------------
# chi-square route for a single categorical covariate
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ContingencyTable:
    """2 x L counts (rows = arms in first-appearance order)."""

    counts: np.ndarray
    category_labels: tuple[str, ...]
    n1: int
    n2: int
    dropped_labels: tuple[str, ...] = ()

    @property
    def column_totals(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def contingency(d: Dataset, covariate: str, treatment: str | None = None) -> ContingencyTable:
    """Treatment-by-category table; empty categories are removed and reported."""
    if treatment is not None and treatment != d.treatment_name:
        raise ValueError(f"treatment column {treatment!r} is not this dataset's ({d.treatment_name!r})")
    cov = d.covariate(covariate)
    if not isinstance(cov.kind, (Binary, Categorical)):
        raise NotCategorical(f"covariate {covariate!r} is continuous")
    labels = cov.kind.labels
    counts = np.zeros((2, len(labels)), dtype=int)
    col = {lab: j for j, lab in enumerate(labels)}
    for arm, value in zip(d.treatment, cov.values):
        counts[0 if arm == d.arms[0] else 1, col[value]] += 1
    keep = counts.sum(axis=0) > 0
    dropped = tuple(lab for lab, k in zip(labels, keep) if not k)
    counts = counts[:, keep]
    counts.setflags(write=False)
    return ContingencyTable(
        counts=counts,
        category_labels=tuple(lab for lab, k in zip(labels, keep) if k),
        n1=int(counts[0].sum()),
        n2=int(counts[1].sum()),
        dropped_labels=dropped,
    )


@dataclass(frozen=True, eq=False)
class ChiSquareResult:
    chi2: float
    per_category: np.ndarray
    r_squared: float


def chi_square(t: ContingencyTable) -> ChiSquareResult:
    """Association chi-square with its per-category decomposition.

    Category j contributes (f1j n2 - f2j n1)^2 / (n1 n2 F_j); the total
    divided by N is R^2_Z for the equivalent dummy regression.
    """
    if t.n1 < 1 or t.n2 < 1 or np.any(t.column_totals < 1):
        raise EmptyMargin("every arm and category total must be >= 1")
    f1 = t.counts[0].astype(float)
    f2 = t.counts[1].astype(float)
    col = t.column_totals.astype(float)
    per = (f1 * t.n2 - f2 * t.n1) ** 2 / (t.n1 * t.n2 * col)
    per.setflags(write=False)
    chi2 = float(per.sum())
    return ChiSquareResult(chi2=chi2, per_category=per, r_squared=chi2 / t.total)


def vif_from_chi_square(t: ContingencyTable) -> VifResult:
    """VIF for a single categorical covariate: lambda = 1/(1 - Chi^2/N)."""
    res = chi_square(t)
    r2 = res.r_squared
    if r2 >= CONFOUNDING_RSQ:
        raise CompleteConfounding(f"Chi^2 = {res.chi2:.15g} equals N = {t.total}")
    return VifResult(1.0 / (1.0 - r2), r2, t.n1, t.n2, len(t.category_labels) - 1,
                     Route.CHI_SQUARE)


# ---------------------------------------------------------------------------
# multivariate-distance bridge
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RaoBridge:
    """Squared multivariate distance, Rao's F, and the implied VIF."""

    d2_mv: float
    f_rao: float
    lambda_: float


def rao_bridge(design: DesignMatrix, treatment: Sequence) -> RaoBridge:
    """Distance route: R^2_Z = n1 n2 D^2 / (N(N-2) + n1 n2 D^2).

    D^2 is recovered by inverting that relation from the regression R^2_Z;
    F_Rao = ((N-k-1)/((N-2)k)) (n1 n2 / N) D^2 and
    lambda = 1 + k F_Rao / (N-k-1).
    """
    k = design.k
    if k < 1:
        raise ValueError("distance route needs k >= 1")
    n = design.matrix.shape[0]
    if n <= k + 1:
        raise ValueError(f"distance route needs N > k+1, got N={n}, k={k}")
    if design.rank < k:
        raise RankDeficient(f"design rank {design.rank} < k = {k}")
    base = vif_regression(design, treatment)
    r2, n1, n2 = base.r_squared_z, base.n1, base.n2
    d2 = n * (n - 2) * r2 / ((1.0 - r2) * n1 * n2)
    f_rao = ((n - k - 1) / ((n - 2) * k)) * (n1 * n2 / n) * d2
    lam = 1.0 + k * f_rao / (n - k - 1)
    return RaoBridge(d2_mv=d2, f_rao=f_rao, lambda_=lam)


# ---------------------------------------------------------------------------
# marginalisation identity
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MarginalSlopes:
    """beta_yz = beta_yz_given_x + beta_yx_given_z * beta_xz."""

    beta_yz: float
    beta_yz_given_x: float
    beta_yx_given_z: float
    beta_xz: float


def marginal_decomposition(outcome, treatment_indicator, covariate) -> MarginalSlopes:
    """Slopes of the marginal, joint, and covariate-on-treatment regressions.

    All regressions include an intercept. Raises DegenerateResponse when
    the joint design is collinear (the conditional slopes are then not
    identified).
    """
    y = np.asarray(outcome, dtype=float)
    z = np.asarray(treatment_indicator, dtype=float)
    x = np.asarray(covariate, dtype=float)
    if y.size < 3 or y.size != z.size or y.size != x.size:
        raise ValueError("need three equally long vectors of length >= 3")
    if len(np.unique(z)) != 2:
        raise ValueError("treatment indicator must take exactly two values")
    n = y.size
    ones = np.ones(n)

    joint = linalg.least_squares(np.column_stack([ones, z, x]), y)
    if joint.rank < 3:
        raise DegenerateResponse("covariate is collinear with the treatment indicator")
    simple_yz = linalg.least_squares(np.column_stack([ones, z]), y)
    simple_xz = linalg.least_squares(np.column_stack([ones, z]), x)
    return MarginalSlopes(
        beta_yz=float(simple_yz.coefficients[1]),
        beta_yz_given_x=float(joint.coefficients[1]),
        beta_yx_given_z=float(joint.coefficients[2]),
        beta_xz=float(simple_xz.coefficients[1]),
    )
