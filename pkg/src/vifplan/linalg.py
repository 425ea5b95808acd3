"""Minimal dense linear algebra kernel for small design matrices.

Cholesky factorization with a relative pivot tolerance, SPD solves, and
rank-revealing least squares via column-pivoted QR (LAPACK dgeqp3 through
scipy). Everything is dense and value-semantic: inputs are validated,
outputs are fresh arrays, nothing is mutated. Intended scale is a few
thousand rows by a few dozen columns.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DegenerateResponse, NotPositiveDefinite

# Relative tolerance for rank / definiteness decisions. Covariates are
# centered and of moderate scale, so a single fixed value is adequate.
PIVOT_RTOL = 1e-10
SYMMETRY_RTOL = 1e-12


def as_matrix(a) -> np.ndarray:
    """Validate `a` as a finite 2-d float matrix with rows, cols >= 1."""
    m = np.asarray(a, dtype=float)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ValueError(f"expected a matrix with >=1 row and column, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix entries must be finite")
    return m


def _as_vector(b, n: int) -> np.ndarray:
    v = np.asarray(b, dtype=float).reshape(-1)
    if v.size != n:
        raise ValueError(f"expected a vector of length {n}, got {v.size}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector entries must be finite")
    return v


def cholesky(a, *, rtol: float = PIVOT_RTOL) -> np.ndarray:
    """Lower-triangular L with L @ L.T = a for symmetric positive definite a.

    Raises NotPositiveDefinite when any pivot is <= rtol * max(diag(a)).
    """
    a = as_matrix(a)
    n, m = a.shape
    if n != m:
        raise ValueError(f"matrix must be square, got {a.shape}")
    scale = float(np.abs(a).max())
    if scale > 0 and float(np.abs(a - a.T).max()) > SYMMETRY_RTOL * scale:
        raise ValueError("matrix is not symmetric")
    max_diag = max(float(np.max(np.diag(a))), 0.0)
    lower = np.zeros_like(a)
    for j in range(n):
        pivot = a[j, j] - lower[j, :j] @ lower[j, :j]
        if pivot <= rtol * max_diag:
            raise NotPositiveDefinite(
                f"pivot {pivot:.6e} at column {j} (max diagonal {max_diag:.6e})"
            )
        ljj = np.sqrt(pivot)
        lower[j, j] = ljj
        if j + 1 < n:
            lower[j + 1:, j] = (a[j + 1:, j] - lower[j + 1:, :j] @ lower[j, :j]) / ljj
    return lower


def solve_spd(a, b) -> np.ndarray:
    """Solve a @ x = b for symmetric positive definite a via Cholesky."""
    a = as_matrix(a)
    lower = cholesky(a)
    v = _as_vector(b, a.shape[0])
    y = scipy.linalg.solve_triangular(lower, v, lower=True, check_finite=False)
    return scipy.linalg.solve_triangular(lower.T, y, lower=False, check_finite=False)


def pivoted_rank(x, *, rtol: float = PIVOT_RTOL) -> int:
    """Numerical rank from a column-pivoted QR, pivots relative to the largest."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.size == 0:
        return 0
    r = scipy.linalg.qr(x, mode="r", pivoting=True, check_finite=False)[0]
    d = np.abs(np.diag(r))
    if d.size == 0 or d[0] == 0.0:
        return 0
    return int(np.sum(d > rtol * d[0]))


@dataclass(frozen=True, eq=False)
class OlsFit:
    """Least-squares fit summary.

    residual_dof = rows - rank; r_squared = 1 - residual_ss/total_ss
    (clamped into [0, 1]; total_ss is about the mean of y when the fit was
    requested with center_y).
    """

    coefficients: np.ndarray
    fitted: np.ndarray
    residual_ss: float
    total_ss: float
    r_squared: float
    rank: int
    residual_dof: int


def least_squares(x, y, *, center_y: bool = False, rtol: float = PIVOT_RTOL) -> OlsFit:
    """Rank-revealing least squares of y on the columns of x.

    Uses column-pivoted QR; columns beyond the detected rank get zero
    coefficients, so rank-deficient designs degrade gracefully to a fit in
    the column space. `center_y` makes total_ss the sum of squares about
    the mean of y, giving the standard coefficient of determination.

    Raises DegenerateResponse when the (centered) response has no
    variation at all.
    """
    x = as_matrix(x)
    n = x.shape[0]
    y = _as_vector(y, n)
    if n < 2:
        raise ValueError("least squares needs at least 2 rows")

    q, r, piv = scipy.linalg.qr(x, mode="economic", pivoting=True, check_finite=False)
    d = np.abs(np.diag(r))
    rank = 0
    if d.size > 0 and d[0] > 0.0:
        rank = int(np.sum(d > rtol * d[0]))

    coef = np.zeros(x.shape[1])
    if rank > 0:
        qty = q[:, :rank].T @ y
        coef[piv[:rank]] = scipy.linalg.solve_triangular(
            r[:rank, :rank], qty, lower=False, check_finite=False
        )
    fitted = x @ coef
    resid = y - fitted
    residual_ss = float(resid @ resid)

    if center_y:
        if float(np.ptp(y)) == 0.0:
            raise DegenerateResponse("response is constant; total_ss about the mean is 0")
        dev = y - y.mean()
    else:
        dev = y
    total_ss = float(dev @ dev)
    if total_ss == 0.0:
        raise DegenerateResponse("response has zero total sum of squares")

    r_squared = min(1.0, max(0.0, 1.0 - residual_ss / total_ss))
    return OlsFit(
        coefficients=coef,
        fitted=fitted,
        residual_ss=residual_ss,
        total_ss=total_ss,
        r_squared=r_squared,
        rank=rank,
        residual_dof=n - rank,
    )
