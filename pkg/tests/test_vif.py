import numpy as np
import pytest

from vifplan.dataset import (
    Binary,
    Categorical,
    Continuous,
    Covariate,
    Dataset,
    ModelSpec,
    build_design,
    design_from_columns,
)
from vifplan.errors import (
    CompleteConfounding,
    DegenerateResponse,
    EmptyMargin,
    NotCategorical,
    RankDeficient,
)
from vifplan.vif import (
    ContingencyTable,
    Route,
    chi_square,
    contingency,
    marginal_decomposition,
    rao_bridge,
    vif_from_chi_square,
    vif_quadratic,
    vif_regression,
)


def make_dataset(treatment, covariates, outcome=None):
    return Dataset(
        treatment_name="trt",
        arms=tuple(dict.fromkeys(treatment)),
        treatment=tuple(treatment),
        covariates=tuple(covariates),
        outcome_name="y" if outcome is not None else None,
        outcome=tuple(outcome) if outcome is not None else None,
    )


def binary_dataset_from_counts(f11, f12, f21, f22):
    """Arms 1/2 by rows, binary labels a/b by columns."""
    treatment = ["1"] * (f11 + f12) + ["2"] * (f21 + f22)
    values = ["a"] * f11 + ["b"] * f12 + ["a"] * f21 + ["b"] * f22
    return make_dataset(treatment, [Covariate("x", Binary(("a", "b")), tuple(values))])


def brute_force_r squared(design, treatment):  # noqa: E999  (placeholder, replaced below)
    pass
