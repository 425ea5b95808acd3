"""Closed-form calculators for the costs and benefits of covariate adjustment.

Three multiplicative effects on the precision of the treatment contrast are
covered: residual-variance reduction, variance inflation from covariate
imbalance, and second-order precision loss from degrees of freedom spent on
the covariates. Moments of the inflation factor assume multivariate-normal
covariates; undefined moments are reported as flags rather than raised, so
planning tables can render boundary rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .errors import DomainError


def contrast_variance(n1: int, n2: int, sigma2: float) -> float:
    """Variance of the unadjusted treatment contrast: (1/n1 + 1/n2) * sigma2."""
    if n1 < 1 or n2 < 1:
        raise DomainError(f"arm sizes must be >= 1, got ({n1}, {n2})")
    if not sigma2 > 0:
        raise DomainError(f"sigma2 must be positive, got {sigma2}")
    return (1.0 / n1 + 1.0 / n2) * sigma2


@dataclass(frozen=True)
class TheoryMoments:
    """Mean and variance of the inflation factor for k covariates in N subjects.

    The mean needs N > k+3 and the variance N > k+5; outside those domains
    the value is None and the matching flag is False. k = 0 is the exact
    no-covariate case (mean 1, variance 0).
    """

    n: int
    k: int
    expected_vif: float | None
    vif_variance: float | None
    mean_defined: bool
    variance_defined: bool


def vif_moments(n: int, k: int) -> TheoryMoments:
    """E[lambda] = (N-3)/(N-k-3), Var[lambda] = 2k(N-3)/((N-k-3)^2 (N-k-5))."""
    if n < 2:
        raise DomainError(f"need at least 2 subjects, got {n}")
    if k < 0:
        raise DomainError(f"covariate count must be >= 0, got {k}")
    if k == 0:
        return TheoryMoments(n, 0, 1.0, 0.0, True, True)
    mean = (n - 3) / (n - k - 3) if n > k + 3 else None
    var = 2 * k * (n - 3) / ((n - k - 3) ** 2 * (n - k - 5)) if n > k + 5 else None
    return TheoryMoments(n, k, mean, var, mean is not None, var is not None)


def expected_vif_from_dof(nu: int, k: int) -> float:
    """Expected inflation in terms of residual dof: (nu-1)/(nu-k-1).

    `nu` is the residual degrees of freedom of the covariate-free model,
    N - 2 for a plain two-arm trial or N - c - 2 when c centre intercepts
    are also fitted.
    """
    if k < 0:
        raise DomainError(f"covariate count must be >= 0, got {k}")
    if nu <= k + 1:
        raise DomainError(f"need nu > k+1, got nu={nu}, k={k}")
    return (nu - 1) / (nu - k - 1)


def t_variance(n: int, k: int) -> float:
    """Variance of the contrast's t statistic: (N-2-k)/(N-4-k)."""
    if k < 0:
        raise DomainError(f"covariate count must be >= 0, got {k}")
    if n - k - 4 <= 0:
        raise DomainError(f"t variance needs N-k-4 > 0, got N={n}, k={k}")
    return (n - 2 - k) / (n - 4 - k)


def fisher_precision_factor(nu: int) -> float:
    """Fiducial penalty on effective precision: (nu+3)/(nu+1), decreasing to 1."""
    if nu < 1:
        raise DomainError(f"degrees of freedom must be >= 1, got {nu}")
    return (nu + 3) / (nu + 1)


@dataclass(frozen=True)
class ThreeFactorBudget:
    """Multiplicative budget: expected VIF x RMSE ratio x second-order ratio."""

    expected_vif: float
    rmse_ratio: float
    second_order_ratio: float
    combined: float


def three_factor_budget(n: int, k: int, rmse_ratio: float) -> ThreeFactorBudget:
    """Joint expected effect of adjusting for k covariates.

    `rmse_ratio` is the residual-variance ratio adjusted/unadjusted (1 for
    non-prognostic covariates). The second-order ratio compares the
    fiducial precision factor of the adjusted model (nu = N-2-k) with the
    unadjusted one (nu = N-2), so k = 0 gives the identity. A combined
    value below 1 means adjustment helps in expectation.
    """
    if not 0 < rmse_ratio <= 1:
        raise DomainError(f"rmse_ratio must be in (0, 1], got {rmse_ratio}")
    mom = vif_moments(n, k)
    if not mom.mean_defined:
        raise DomainError(f"expected VIF undefined for N={n}, k={k}")
    if n - 2 - k < 1:
        raise DomainError(f"no residual degrees of freedom left: N={n}, k={k}")
    ratio = fisher_precision_factor(n - 2 - k) / fisher_precision_factor(n - 2)
    return ThreeFactorBudget(
        expected_vif=mom.expected_vif,
        rmse_ratio=rmse_ratio,
        second_order_ratio=ratio,
        combined=mom.expected_vif * rmse_ratio * ratio,
    )


def add_covariate_ratios(nu: int) -> tuple[float, float]:
    """Marginal cost of one extra covariate at residual dof nu.

    Returns (r_lambda, fisher_ratio): the expected-VIF ratio
    (nu-1)/(nu-2) and the second-order ratio (nu+2)(nu+1)/(nu(nu+3)).
    """
    if nu <= 2:
        raise DomainError(f"need nu >= 3, got {nu}")
    r_lambda = (nu - 1) / (nu - 2)
    fisher_ratio = (nu + 2) * (nu + 1) / (nu * (nu + 3))
    return r_lambda, fisher_ratio


class BreakEvenRule(Enum):
    SIMPLE = "simple"
    RULE_OF_THUMB = "rule_of_thumb"
    FISHER = "fisher"


def breakeven(rule: BreakEvenRule, nu: int) -> float:
    """Break-even partial correlation for adding one covariate at dof nu.

    SIMPLE solves r_lambda * (1 - rho^2) = 1, giving 1/sqrt(nu-1);
    RULE_OF_THUMB reserves one extra dof, 1/sqrt(nu-2); FISHER additionally
    multiplies in the second-order ratio, giving
    sqrt((nu^2+5nu-2)/((nu-1)(nu+1)(nu+2))).
    """
    if rule is BreakEvenRule.SIMPLE:
        if nu < 2:
            raise DomainError(f"simple rule needs nu >= 2, got {nu}")
        return 1.0 / math.sqrt(nu - 1)
    if rule is BreakEvenRule.RULE_OF_THUMB:
        if nu < 3:
            raise DomainError(f"rule of thumb needs nu >= 3, got {nu}")
        return 1.0 / math.sqrt(nu - 2)
    if rule is BreakEvenRule.FISHER:
        if nu < 2:
            raise DomainError(f"fisher rule needs nu >= 2, got {nu}")
        radicand = (nu * nu + 5 * nu - 2) / ((nu - 1) * (nu + 1) * (nu + 2))
        if not 0 < radicand <= 1:
            raise DomainError(f"fisher radicand {radicand} outside (0, 1] at nu={nu}")
        return math.sqrt(radicand)
    raise DomainError(f"unknown rule {rule!r}")


def historical_score_ratios(
    n: int, k: int, rho_current: float, rho_historical: float
) -> tuple[float, float]:
    """Fitting k covariates anew versus one historical score built from them.

    Returns (vif_ratio, rmse_ratio), both oriented fresh-fit over score:
    vif_ratio = (N-4)/(N-k-3) and rmse_ratio = (1-rho_current^2)/(1-rho_historical^2),
    where rho_current is the fresh linear predictor's correlation with the
    outcome and rho_historical the score's. Their product below 1 means
    fitting the covariates anew wins.
    """
    if k < 1:
        raise DomainError(f"need k >= 1 covariates, got {k}")
    if n <= k + 3:
        raise DomainError(f"need N > k+3, got N={n}, k={k}")
    if not abs(rho_current) < 1 or not abs(rho_historical) < 1:
        raise DomainError("correlations must be inside (-1, 1)")
    vif_ratio = (n - 4) / (n - k - 3)
    rmse_ratio = (1 - rho_current**2) / (1 - rho_historical**2)
    return vif_ratio, rmse_ratio


@dataclass(frozen=True)
class FMoments:
    """Mean and variance of an F(nu, omega) variable, with validity flags."""

    mean: float | None
    variance: float | None
    mean_defined: bool
    variance_defined: bool


def f_moments(nu: int, omega: int) -> FMoments:
    """mean = omega/(omega-2) for omega > 2;
    variance = 2 omega^2 (nu+omega-2) / (nu (omega-2)^2 (omega-4)) for omega > 4."""
    if nu < 1 or omega < 1:
        raise DomainError(f"degrees of freedom must be >= 1, got ({nu}, {omega})")
    mean = omega / (omega - 2) if omega > 2 else None
    var = (2 * omega**2 * (nu + omega - 2) / (nu * (omega - 2) ** 2 * (omega - 4))
           if omega > 4 else None)
    return FMoments(mean, var, mean is not None, var is not None)


def mc_standard_error(variance: float, m: int) -> float:
    """Monte Carlo standard error sqrt(variance/m) for m replicates."""
    if variance < 0:
        raise DomainError(f"variance must be >= 0, got {variance}")
    if m < 1:
        raise DomainError(f"replicate count must be >= 1, got {m}")
    return math.sqrt(variance / m)
