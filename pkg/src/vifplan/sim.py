"""Deterministic Monte Carlo engine for the three covariate sampling schemes.

Schemes
-------
PERMUTATION  covariates frozen, treatment redrawn Bernoulli(1/2) per subject
             (a strict fixed-margin variant is available via SimConfig).
MVN          treatment frozen, covariates redrawn from a multivariate normal
             with the sample moments; binary covariates are produced by
             dichotomising their +-1/2-coded latent coordinate at 0.
BOOTSTRAP    treatment frozen, complete covariate rows resampled with
             replacement.

Determinism contract
--------------------
Every replicate's randomness derives from
``SeedSequence(seed, spawn_key=(scheme, model, replicate, attempt))`` feeding
a Philox counter-based generator, so draws depend only on the root seed and
the logical position of the replicate, never on execution order. Cells are
independent work units and may run on any number of threads; per-cell
aggregation happens on arrays assembled in replicate order, which makes the
reduction schedule-independent at the bit level.

Degenerate replicates (complete confounding, an empty arm under the
permutation scheme, or rank collapse of the drawn design) are redrawn with a
fresh substream up to ``max_redraws`` times, then dropped and counted; a cell
dropping more than 1% of its replicates raises TooManyRedraws.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from . import theory
from .dataset import (
    Binary,
    Categorical,
    Dataset,
    DesignMatrix,
    ModelSpec,
    MomentSummary,
    build_design,
    design_from_columns,
    model_columns,
    sample_moments,
    validate_model,
)
from .errors import (
    CategoricalUnsupported,
    CompleteConfounding,
    NotPositiveDefinite,
    NotPositiveSemiDefinite,
    TooManyRedraws,
)
from .linalg import cholesky
from .vif import vif_regression

MAX_DROP_FRACTION = 0.01


class Scheme(Enum):
    PERMUTATION = "permutation"
    MVN = "mvn"
    BOOTSTRAP = "bootstrap"


@dataclass(frozen=True)
class RngStream:
    """Root seed plus a logical path; yields an order-independent generator."""

    seed: int
    path: tuple[int, ...]

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=self.path)
        return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class SimConfig:
    schemes: tuple[Scheme, ...]
    models: tuple[ModelSpec, ...]
    replicates: int
    seed: int
    max_redraws: int = 100
    fixed_margin_permutation: bool = False

    def __post_init__(self):
        if not self.schemes or len(set(self.schemes)) != len(self.schemes):
            raise ValueError("schemes must be non-empty and distinct")
        if not self.models:
            raise ValueError("at least one model is required")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.max_redraws < 0:
            raise ValueError("max_redraws must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")


@dataclass(frozen=True)
class SimCell:
    """Aggregate for one (scheme, model) pair."""

    scheme: Scheme
    model: ModelSpec
    k: int
    m_requested: int
    m_effective: int
    mean_lambda: float | None
    var_lambda: float | None
    mc_se_mean: float | None
    theory_mean: float | None
    theory_var: float | None
    redraw_count: int
    dropped: int
    supported: bool = True


# ---------------------------------------------------------------------------
# scheme draws
# ---------------------------------------------------------------------------

def draw_permutation(stream: RngStream, n: int, arms: tuple = (1, 2)) -> list:
    """Assign each subject to arms[0] or arms[1] independently with p = 1/2."""
    if n < 2:
        raise ValueError(f"need n >= 2 subjects, got {n}")
    picks = stream.generator().integers(0, 2, size=n)
    return [arms[p] for p in picks]


def draw_fixed_margin_permutation(stream: RngStream, labels: Sequence) -> list:
    """Random permutation of the original labels (arm sizes held fixed)."""
    labels = list(labels)
    if len(labels) < 2:
        raise ValueError("need at least 2 subjects")
    order = stream.generator().permutation(len(labels))
    return [labels[i] for i in order]


def _psd_factor(cov: np.ndarray) -> np.ndarray:
    """Lower factor of a PSD covariance; jitters the diagonal on marginal failure."""
    p = cov.shape[0]
    if p == 0:
        return cov.copy()
    max_diag = float(np.max(np.diag(cov)))
    if max_diag < 0:
        raise NotPositiveSemiDefinite(f"negative diagonal {max_diag:.6e}")
    if max_diag == 0.0:
        if np.any(cov != 0.0):
            raise NotPositiveSemiDefinite("zero diagonal with non-zero off-diagonals")
        return np.zeros_like(cov)
    try:
        return cholesky(cov)
    except NotPositiveDefinite:
        jitter = 1e-10 * max_diag
        try:
            # absolute positivity is enough once the jitter is in
            return cholesky(cov + jitter * np.eye(p), rtol=0.0)
        except NotPositiveDefinite as e:
            raise NotPositiveSemiDefinite(f"covariance not PSD after jitter: {e}") from e


def draw_mvn_covariates(
    stream: RngStream, moments: MomentSummary, kinds: Sequence, n: int
) -> np.ndarray:
    """n independent draws from N(mean, covariance) as coded columns.

    Binary coordinates are dichotomised at 0 into the -1/2 / +1/2 coding;
    multi-level categorical covariates are not supported by this scheme.
    """
    p = len(moments.names)
    if len(kinds) != p:
        raise ValueError("kinds must match the moment columns")
    if any(isinstance(kind, Categorical) for kind in kinds):
        raise CategoricalUnsupported("MVN scheme supports continuous and binary covariates only")
    factor = _psd_factor(np.asarray(moments.covariance, dtype=float))
    z = stream.generator().standard_normal((n, p))
    draws = moments.mean + z @ factor.T
    for j, kind in enumerate(kinds):
        if isinstance(kind, Binary):
            draws[:, j] = np.where(draws[:, j] > 0.0, 0.5, -0.5)
    return draws


def draw_bootstrap(stream: RngStream, d: Dataset) -> np.ndarray:
    """Resampling index vector: one uniform draw on 0..N-1 per subject.

    Selecting rows by these indices keeps each covariate row intact; the
    subject's original treatment is retained by the caller.
    """
    if d.n < 2:
        raise ValueError(f"need N >= 2 subjects, got {d.n}")
    return stream.generator().integers(0, d.n, size=d.n)


# ---------------------------------------------------------------------------
# engine
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class _ModelPrep:
    model: ModelSpec
    k: int
    design: DesignMatrix            # fixed design used by PERMUTATION
    coded: np.ndarray               # raw coded columns used by BOOTSTRAP
    coded_names: tuple[str, ...]
    moments: MomentSummary | None   # None when MVN cannot run this model
    kinds: tuple | None
    theory_mean: float | None
    theory_var: float | None


def _prepare(d: Dataset, model: ModelSpec) -> _ModelPrep:
    validate_model(d, model)
    design = build_design(d, model)
    coded, coded_names = model_columns(d, model)
    mvn_ok = not any(isinstance(d.covariate(n).kind, Categorical)
                     for n in model.covariate_names)
    moments = sample_moments(d, model) if mvn_ok else None
    kinds = tuple(d.covariate(n).kind for n in model.covariate_names) if mvn_ok else None
    mom = theory.vif_moments(d.n, design.k)
    return _ModelPrep(
        model=model,
        k=design.k,
        design=design,
        coded=coded,
        coded_names=coded_names,
        moments=moments,
        kinds=kinds,
        theory_mean=mom.expected_vif,
        theory_var=mom.vif_variance,
    )


def _replicate_lambda(
    d: Dataset, cfg: SimConfig, scheme: Scheme, prep: _ModelPrep, stream: RngStream
) -> float | None:
    """lambda for one attempt, or None when the draw is degenerate."""
    if scheme is Scheme.PERMUTATION:
        if cfg.fixed_margin_permutation:
            labels = draw_fixed_margin_permutation(stream, d.treatment)
        else:
            labels = draw_permutation(stream, d.n, d.arms)
        if len(set(labels)) < 2:
            return None
        design = prep.design
        treatment = labels
    elif scheme is Scheme.MVN:
        cols = draw_mvn_covariates(stream, prep.moments, prep.kinds, d.n)
        design = design_from_columns(cols, prep.moments.names)
        treatment = d.treatment
    else:
        idx = draw_bootstrap(stream, d)
        design = design_from_columns(prep.coded[idx], prep.coded_names)
        treatment = d.treatment
    if design.rank < design.k:
        return None
    try:
        return vif_regression(design, treatment).lambda_
    except CompleteConfounding:
        return None


def _run_cell(
    d: Dataset, cfg: SimConfig, s_idx: int, scheme: Scheme, m_idx: int, prep: _ModelPrep
) -> SimCell:
    if scheme is Scheme.MVN and prep.moments is None:
        return SimCell(scheme, prep.model, prep.k, cfg.replicates, 0,
                       None, None, None, prep.theory_mean, prep.theory_var,
                       0, 0, supported=False)
    max_dropped = cfg.replicates * MAX_DROP_FRACTION
    lambdas: list[float] = []
    redraws = 0
    dropped = 0
    for r in range(cfg.replicates):
        lam = None
        for attempt in range(cfg.max_redraws + 1):
            stream = RngStream(cfg.seed, (s_idx, m_idx, r, attempt))
            lam = _replicate_lambda(d, cfg, scheme, prep, stream)
            if lam is not None:
                break
            if attempt < cfg.max_redraws:
                redraws += 1
        if lam is None:
            dropped += 1
            if dropped > max_dropped:
                raise TooManyRedraws(
                    f"cell ({scheme.value}, {prep.model}) dropped {dropped} of "
                    f"{cfg.replicates} replicates (> {MAX_DROP_FRACTION:.0%})"
                )
        else:
            lambdas.append(lam)

    arr = np.asarray(lambdas)
    m_eff = arr.size
    mean = float(arr.mean()) if m_eff >= 1 else None
    var = float(arr.var(ddof=1)) if m_eff >= 2 else None
    se = math.sqrt(var / m_eff) if var is not None else None
    return SimCell(
        scheme=scheme,
        model=prep.model,
        k=prep.k,
        m_requested=cfg.replicates,
        m_effective=m_eff,
        mean_lambda=mean,
        var_lambda=var,
        mc_se_mean=se,
        theory_mean=prep.theory_mean,
        theory_var=prep.theory_var,
        redraw_count=redraws,
        dropped=dropped,
    )


def run_simulation(d: Dataset, cfg: SimConfig, jobs: int = 1) -> list[SimCell]:
    """All (scheme, model) cells, deterministically, optionally threaded.

    Results are identical for a fixed config regardless of `jobs`: every
    cell is a pure function of (dataset, config, scheme index, model index).
    Cells are ordered scheme-major in config order.
    """
    if jobs < 1:
        raise ValueError("jobs must be >= 1")
    preps = [_prepare(d, m) for m in cfg.models]
    tasks = [(s_idx, scheme, m_idx, preps[m_idx])
             for s_idx, scheme in enumerate(cfg.schemes)
             for m_idx in range(len(cfg.models))]

    def work(task):
        s_idx, scheme, m_idx, prep = task
        return _run_cell(d, cfg, s_idx, scheme, m_idx, prep)

    if jobs == 1:
        return [work(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(work, tasks))
