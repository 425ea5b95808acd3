"""Cost/benefit of covariate adjustment in two-arm randomised experiments.

Observed variance inflation factors by three equivalent routes, closed-form
moments and break-even rules for planning, and a deterministic three-scheme
Monte Carlo engine for verifying the theory on a concrete trial.
"""

__version__ = "0.1.0"

from .dataset import (
    Binary,
    Categorical,
    Continuous,
    CorrelationReport,
    Covariate,
    CovariateKind,
    Dataset,
    DesignMatrix,
    ModelSpec,
    MomentSummary,
    build_design,
    correlation_report,
    design_from_columns,
    enumerate_models,
    format_load_report,
    load_csv,
    sample_moments,
)
from .errors import (
    CategoricalUnsupported,
    CompleteConfounding,
    ConstantColumn,
    DegenerateResponse,
    DomainError,
    EmptyDataset,
    EmptyMargin,
    NotCategorical,
    NotPositiveDefinite,
    NotPositiveSemiDefinite,
    NotTwoArms,
    RankDeficient,
    SchemaMismatch,
    TooManyCovariates,
    TooManyRedraws,
    VifplanError,
)
from .linalg import OlsFit, cholesky, least_squares, solve_spd
from .sim import (
    RngStream,
    Scheme,
    SimCell,
    SimConfig,
    draw_bootstrap,
    draw_fixed_margin_permutation,
    draw_mvn_covariates,
    draw_permutation,
    run_simulation,
)
from .theory import (
    BreakEvenRule,
    FMoments,
    TheoryMoments,
    ThreeFactorBudget,
    add_covariate_ratios,
    breakeven,
    contrast_variance,
    expected_vif_from_dof,
    f_moments,
    fisher_precision_factor,
    historical_score_ratios,
    mc_standard_error,
    t_variance,
    three_factor_budget,
    vif_moments,
)
from .vif import (
    ChiSquareResult,
    ContingencyTable,
    MarginalSlopes,
    RaoBridge,
    Route,
    VifResult,
    chi_square,
    contingency,
    marginal_decomposition,
    rao_bridge,
    vif_from_chi_square,
    vif_quadratic,
    vif_regression,
)
