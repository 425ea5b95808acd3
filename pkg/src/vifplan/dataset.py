"""Subject-level trial data.

Typed CSV ingestion, expansion of covariates into centered design matrices,
candidate-model enumeration, sample moments for the multivariate-normal
sampling scheme, and ordinary/partial correlation summaries.

Conventions fixed here and relied on elsewhere:
  * arm order = first appearance in the data; the numeric treatment
    indicator codes the first arm 0 and the second 1,
  * binary covariates are coded -1/2 (first declared label) and +1/2,
  * a categorical with L levels expands to L-1 dummy columns against the
    first declared label as reference,
  * design columns are centered about their overall means.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, TextIO

import numpy as np

from . import linalg
from .errors import (
    CategoricalUnsupported,
    ConstantColumn,
    DegenerateResponse,
    EmptyDataset,
    NotTwoArms,
    SchemaMismatch,
    TooManyCovariates,
)

MAX_ENUMERATED_COVARIATES = 20


# ---------------------------------------------------------------------------
# covariate kinds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Continuous:
    """Real-valued covariate, used as a single centered column."""


@dataclass(frozen=True)
class Binary:
    """Two-level covariate; labels are (reference, other) in declared order."""

    labels: tuple[str, str]

    def __post_init__(self):
        _check_labels(self.labels, exactly=2)


@dataclass(frozen=True)
class Categorical:
    """Covariate with >=2 ordered levels; the first label is the reference."""

    labels: tuple[str, ...]

    def __post_init__(self):
        _check_labels(self.labels)


CovariateKind = Continuous | Binary | Categorical


def _check_labels(labels: tuple[str, ...], exactly: int | None = None) -> None:
    if exactly is not None and len(labels) != exactly:
        raise ValueError(f"expected exactly {exactly} labels, got {len(labels)}")
    if len(labels) < 2:
        raise ValueError("need at least two level labels")
    if len(set(labels)) != len(labels) or any(not lab for lab in labels):
        raise ValueError(f"labels must be distinct and non-empty: {labels!r}")


@dataclass(frozen=True)
class Covariate:
    name: str
    kind: CovariateKind
    values: tuple  # floats for Continuous, label strings otherwise

    def __post_init__(self):
        if isinstance(self.kind, Continuous):
            if not all(np.isfinite(v) for v in self.values):
                raise SchemaMismatch(f"covariate {self.name!r} has non-finite values")
        else:
            bad = sorted({v for v in self.values if v not in self.kind.labels})
            if bad:
                raise SchemaMismatch(
                    f"covariate {self.name!r} has values outside declared labels: {bad}"
                )

    def distinct_count(self) -> int:
        return len(set(self.values))


# ---------------------------------------------------------------------------
# dataset
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Dataset:
    """Immutable two-arm trial table; safe for concurrent reads."""

    treatment_name: str
    arms: tuple[str, str]
    treatment: tuple[str, ...]
    covariates: tuple[Covariate, ...]
    outcome_name: str | None = None
    outcome: tuple[float, ...] | None = None
    dropped_rows: tuple[int, ...] = ()  # 1-based file line numbers

    def __post_init__(self):
        n = len(self.treatment)
        if n == 0:
            raise EmptyDataset("no subjects")
        seen = tuple(dict.fromkeys(self.treatment))
        if len(seen) != 2:
            raise NotTwoArms(f"expected two arms, found {len(seen)}: {seen}")
        if tuple(self.arms) != seen:
            raise ValueError("arms must list the two labels in first-appearance order")
        names = [c.name for c in self.covariates]
        if len(set(names)) != len(names):
            raise SchemaMismatch(f"duplicate covariate names: {names}")
        for c in self.covariates:
            if len(c.values) != n:
                raise ValueError(f"covariate {c.name!r} has {len(c.values)} values for {n} subjects")
        if self.outcome is not None:
            if len(self.outcome) != n:
                raise ValueError("outcome length does not match subject count")
            if not all(np.isfinite(v) for v in self.outcome):
                raise SchemaMismatch("outcome has non-finite values")

    @property
    def n(self) -> int:
        return len(self.treatment)

    @property
    def n1(self) -> int:
        return sum(1 for t in self.treatment if t == self.arms[0])

    @property
    def n2(self) -> int:
        return self.n - self.n1

    @property
    def covariate_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.covariates)

    def covariate(self, name: str) -> Covariate:
        for c in self.covariates:
            if c.name == name:
                return c
        raise SchemaMismatch(f"unknown covariate {name!r}")

    def indicator(self) -> np.ndarray:
        """0/1 treatment indicator (first-appearance arm = 0)."""
        return np.fromiter((0.0 if t == self.arms[0] else 1.0 for t in self.treatment),
                           dtype=float, count=self.n)


def format_load_report(d: Dataset) -> str:
    """Structured text listing rows dropped at ingestion."""
    lines = [f"loaded {d.n} subjects ({d.arms[0]}={d.n1}, {d.arms[1]}={d.n2})"]
    if d.dropped_rows:
        lines.append(f"dropped {len(d.dropped_rows)} row(s) with missing values:")
        lines.extend(f"  line {r}" for r in d.dropped_rows)
    else:
        lines.append("dropped 0 rows")
    return "\n".join(lines)


def load_csv(
    source: TextIO,
    schema: Mapping[str, CovariateKind],
    treatment_column: str,
    outcome_column: str | None = None,
) -> Dataset:
    """Read a typed Dataset from a CSV text stream.

    The first row must be a header. Rows with any missing (empty) field in
    a used column are dropped and recorded in `Dataset.dropped_rows`;
    non-empty values that fail to parse raise SchemaMismatch. Subjects keep
    file order.
    """
    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise EmptyDataset("input has no header row") from None
    header = [h.strip() for h in header]
    col_index: dict[str, int] = {}
    for i, h in enumerate(header):
        if h in col_index:
            raise SchemaMismatch(f"duplicate column {h!r} in header")
        col_index[h] = i

    used = [treatment_column, *schema.keys()]
    if outcome_column is not None:
        used.append(outcome_column)
    for name in used:
        if name not in col_index:
            raise SchemaMismatch(f"column {name!r} not present in header {header}")

    treatment: list[str] = []
    outcome: list[float] = []
    cov_values: dict[str, list] = {name: [] for name in schema}
    dropped: list[int] = []

    for line_no, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        cells = {name: (row[col_index[name]].strip() if col_index[name] < len(row) else "")
                 for name in used}
        if any(cells[name] == "" for name in used):
            dropped.append(line_no)
            continue
        treatment.append(cells[treatment_column])
        if outcome_column is not None:
            outcome.append(_parse_float(cells[outcome_column], outcome_column, line_no))
        for name, kind in schema.items():
            raw = cells[name]
            if isinstance(kind, Continuous):
                cov_values[name].append(_parse_float(raw, name, line_no))
            else:
                if raw not in kind.labels:
                    raise SchemaMismatch(
                        f"line {line_no}: value {raw!r} of {name!r} not in declared labels {kind.labels}"
                    )
                cov_values[name].append(raw)

    if not treatment:
        raise EmptyDataset("no usable data rows")
    arms = tuple(dict.fromkeys(treatment))
    if len(arms) != 2:
        raise NotTwoArms(f"treatment column {treatment_column!r} has {len(arms)} distinct values: {arms}")

    covariates = tuple(
        Covariate(name, kind, tuple(cov_values[name])) for name, kind in schema.items()
    )
    return Dataset(
        treatment_name=treatment_column,
        arms=(arms[0], arms[1]),
        treatment=tuple(treatment),
        covariates=covariates,
        outcome_name=outcome_column,
        outcome=tuple(outcome) if outcome_column is not None else None,
        dropped_rows=tuple(dropped),
    )


def _parse_float(raw: str, column: str, line_no: int) -> float:
    try:
        v = float(raw)
    except ValueError:
        raise SchemaMismatch(f"line {line_no}: cannot parse {raw!r} in column {column!r}") from None
    if not np.isfinite(v):
        raise SchemaMismatch(f"line {line_no}: non-finite value in column {column!r}")
    return v


# ---------------------------------------------------------------------------
# models and design matrices
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelSpec:
    """Ordered subset of covariate names; empty means treatment-only."""

    covariate_names: tuple[str, ...] = ()

    def __post_init__(self):
        if len(set(self.covariate_names)) != len(self.covariate_names):
            raise SchemaMismatch(f"duplicate names in model: {self.covariate_names}")

    def __str__(self) -> str:
        return "+".join(self.covariate_names) if self.covariate_names else "(none)"


def validate_model(d: Dataset, m: ModelSpec) -> None:
    for name in m.covariate_names:
        d.covariate(name)


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """N x k matrix of centered numeric covariate columns."""

    matrix: np.ndarray
    column_names: tuple[str, ...]
    k: int
    rank: int


def design_from_columns(columns: np.ndarray, names: Iterable[str]) -> DesignMatrix:
    """Center raw numeric columns and attach rank diagnostics."""
    cols = np.asarray(columns, dtype=float)
    if cols.ndim != 2:
        raise ValueError(f"expected a 2-d column block, got shape {cols.shape}")
    names = tuple(names)
    if cols.shape[1] != len(names):
        raise ValueError("column count does not match name count")
    if not np.all(np.isfinite(cols)):
        raise ValueError("design columns must be finite")
    centered = cols - cols.mean(axis=0, keepdims=True) if cols.size else cols.copy()
    rank = linalg.pivoted_rank(centered) if centered.shape[1] > 0 else 0
    centered.setflags(write=False)
    return DesignMatrix(matrix=centered, column_names=names, k=centered.shape[1], rank=rank)


def model_columns(
    d: Dataset, m: ModelSpec, allow_constant: bool = False
) -> tuple[np.ndarray, tuple[str, ...]]:
    """Raw (uncentered) numeric columns for a model, dummies expanded.

    Continuous -> the values; binary -> -1/2 / +1/2 by declared label order;
    categorical with L levels -> L-1 0/1 dummies against the first label.
    """
    validate_model(d, m)
    cols: list[np.ndarray] = []
    names: list[str] = []
    for name in m.covariate_names:
        cov = d.covariate(name)
        if cov.distinct_count() < 2 and not allow_constant:
            raise ConstantColumn(f"covariate {name!r} takes a single value")
        if isinstance(cov.kind, Continuous):
            cols.append(np.asarray(cov.values, dtype=float))
            names.append(name)
        elif isinstance(cov.kind, Binary):
            lo, hi = cov.kind.labels
            cols.append(np.fromiter((-0.5 if v == lo else 0.5 for v in cov.values),
                                    dtype=float, count=d.n))
            names.append(name)
        else:
            for level in cov.kind.labels[1:]:
                cols.append(np.fromiter((1.0 if v == level else 0.0 for v in cov.values),
                                        dtype=float, count=d.n))
                names.append(f"{name}[{level}]")
    block = np.column_stack(cols) if cols else np.empty((d.n, 0))
    return block, tuple(names)


def build_design(d: Dataset, m: ModelSpec) -> DesignMatrix:
    """Centered design matrix for a model (k = expanded column count)."""
    block, names = model_columns(d, m)
    return design_from_columns(block, names)


def enumerate_models(covariate_names: Iterable[str]) -> list[ModelSpec]:
    """All 2^k covariate subsets, ordered by size then lexicographically."""
    names = tuple(covariate_names)
    if len(set(names)) != len(names):
        raise SchemaMismatch(f"duplicate covariate names: {names}")
    if len(names) > MAX_ENUMERATED_COVARIATES:
        raise TooManyCovariates(f"{len(names)} covariates would enumerate 2^{len(names)} models")
    models = [ModelSpec(subset)
              for size in range(len(names) + 1)
              for subset in itertools.combinations(names, size)]
    models.sort(key=lambda m: (len(m.covariate_names), m.covariate_names))
    return models


# ---------------------------------------------------------------------------
# sample moments (multivariate-normal sampling scheme)
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MomentSummary:
    """Sample mean vector and covariance (denominator N-1) of coded columns."""

    names: tuple[str, ...]
    mean: np.ndarray
    covariance: np.ndarray
    constant_columns: tuple[str, ...] = ()


def sample_moments(d: Dataset, m: ModelSpec) -> MomentSummary:
    """Per-column sample means and covariance of numerically coded covariates.

    Binary covariates enter with the -1/2 / +1/2 coding; multi-level
    categoricals are not representable as one latent normal coordinate and
    raise CategoricalUnsupported.
    """
    validate_model(d, m)
    for name in m.covariate_names:
        kind = d.covariate(name).kind
        if isinstance(kind, Categorical):
            raise CategoricalUnsupported(
                f"covariate {name!r} is categorical with >2 levels; "
                "sample moments support continuous and binary covariates only"
            )
    block, names = model_columns(d, m, allow_constant=True)
    p = block.shape[1]
    if p == 0:
        return MomentSummary(names=(), mean=np.empty(0), covariance=np.empty((0, 0)))
    mean = block.mean(axis=0)
    dev = block - mean
    cov = dev.T @ dev / (d.n - 1)
    constant = tuple(names[j] for j in range(p) if cov[j, j] == 0.0)
    return MomentSummary(names=names, mean=mean, covariance=cov, constant_columns=constant)


# ---------------------------------------------------------------------------
# correlation summaries
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CorrelationRow:
    name: str
    outcome_ordinary: float
    treatment_ordinary: float
    outcome_partial: float
    treatment_partial: float


@dataclass(frozen=True)
class CorrelationReport:
    rows: tuple[CorrelationRow, ...]


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    da = a - a.mean()
    db = b - b.mean()
    n = a.size
    tol_a = (1e-12 * max(1.0, float(np.abs(a).max()))) ** 2 * n
    tol_b = (1e-12 * max(1.0, float(np.abs(b).max()))) ** 2 * n
    ssa = float(da @ da)
    ssb = float(db @ db)
    if ssa <= tol_a or ssb <= tol_b:
        raise DegenerateResponse("zero residual variance in correlation")
    return float((da @ db) / np.sqrt(ssa * ssb))


def _residualize(target: np.ndarray, others: np.ndarray) -> np.ndarray:
    n = target.size
    x = np.column_stack([np.ones(n), others]) if others.shape[1] > 0 else np.ones((n, 1))
    fit = linalg.least_squares(x, target)
    return target - fit.fitted


def correlation_report(d: Dataset) -> CorrelationReport:
    """Ordinary and partial correlations of each covariate with the outcome
    and the treatment indicator.

    Partial correlations residualize both sides on the remaining covariates
    (plus an intercept) before correlating.
    """
    if d.outcome is None:
        raise ValueError("dataset has no outcome column")
    full = ModelSpec(d.covariate_names)
    for name in d.covariate_names:
        if isinstance(d.covariate(name).kind, Categorical):
            raise CategoricalUnsupported(
                f"covariate {name!r} is not numerically codable as one column"
            )
    block, names = model_columns(d, full)
    y = np.asarray(d.outcome, dtype=float)
    z = d.indicator()

    rows = []
    for j, name in enumerate(names):
        xj = block[:, j]
        others = np.delete(block, j, axis=1)
        res_x = _residualize(xj, others)
        res_y = _residualize(y, others)
        res_z = _residualize(z, others)
        rows.append(CorrelationRow(
            name=name,
            outcome_ordinary=_pearson(xj, y),
            treatment_ordinary=_pearson(xj, z),
            outcome_partial=_pearson(res_x, res_y),
            treatment_partial=_pearson(res_x, res_z),
        ))
    return CorrelationReport(rows=tuple(rows))
