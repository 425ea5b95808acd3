import io

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
    correlation_report,
    design_from_columns,
    enumerate_models,
    format_load_report,
    load_csv,
    sample_moments,
)
from vifplan.errors import (
    CategoricalUnsupported,
    ConstantColumn,
    DegenerateResponse,
    EmptyDataset,
    NotTwoArms,
    SchemaMismatch,
    TooManyCovariates,
)
from vifplan.linalg import least_squares


def _load(text, schema, treatment="trt", outcome=None):
    return load_csv(io.StringIO(text), schema, treatment, outcome)


FOUR_ROWS = "trt,sex,age\nA,M,30\nA,F,40\nB,M,50\nB,F,60\n"
SCHEMA_SA = {"sex": Binary(("M", "F")), "age": Continuous()}


class TestLoadCsv:
    def test_four_row_fixture(self):
        d = _load(FOUR_ROWS, SCHEMA_SA)
        assert d.n == 4 and d.n1 == 2 and d.n2 == 2
        assert d.arms == ("A", "B")
        assert d.covariate_names == ("sex", "age")
        assert d.covariate("age").values == (30.0, 40.0, 50.0, 60.0)

    def test_three_arms_rejected(self):
        text = "trt,age\nA,1\nB,2\nC,3\n"
        with pytest.raises(NotTwoArms):
            _load(text, {"age": Continuous()})

    def test_missing_value_drops_row(self):
        text = "trt,sex,age\nA,M,30\nA,F,\nB,M,50\nB,F,60\n"
        d = _load(text, SCHEMA_SA)
        assert d.n == 3
        assert d.dropped_rows == (3,)
        report = format_load_report(d)
        assert "dropped 1 row" in report and "line 3" in report

    def test_unparseable_value_raises(self):
        text = "trt,age\nA,1\nB,not-a-number\n"
        with pytest.raises(SchemaMismatch):
            _load(text, {"age": Continuous()})

    def test_value_outside_labels_raises(self):
        text = "trt,sex\nA,M\nB,X\n"
        with pytest.raises(SchemaMismatch):
            _load(text, {"sex": Binary(("M", "F"))})

    def test_unknown_column_raises(self):
        with pytest.raises(SchemaMismatch):
            _load(FOUR_ROWS, {"height": Continuous()})

    def test_empty_dataset(self):
        with pytest.raises(EmptyDataset):
            _load("trt,age\n", {"age": Continuous()})

    def test_outcome_column(self):
        text = "trt,age,y\nA,1,2.5\nB,2,3.5\n"
        d = _load(text, {"age": Continuous()}, outcome="y")
        assert d.outcome == (2.5, 3.5)

    def test_subjects_keep_file_order(self):
        d = _load(FOUR_ROWS, SCHEMA_SA)
        assert d.treatment == ("A", "A", "B", "B")


class TestBuildDesign:
    def test_empty_model(self):
        d = _load(FOUR_ROWS, SCHEMA_SA)
        design = build_design(d, ModelSpec())
        assert design.k == 0 and design.rank == 0
        assert design.matrix.shape == (4, 0)

    def test_binary_column_is_centered(self):
        text = "trt,sex\nA,M\nA,M\nB,M\nB,F\n"
        d = _load(text, {"sex": Binary(("M", "F"))})
        design = build_design(d, ModelSpec(("sex",)))
        assert design.k == 1
        assert abs(design.matrix.sum()) <= 1e-12
        # coded -1/2,+1/2 then centered: 3 M and 1 F
        assert np.allclose(sorted(design.matrix[:, 0]), [-0.25, -0.25, -0.25, 0.75])

    def test_categorical_dummy_coding(self):
        text = "trt,grp\n" + "\n".join(
            f"{t},{g}" for t, g in zip("AAABBB", ["lo", "mid", "hi", "lo", "mid", "hi"])
        ) + "\n"
        d = _load(text, {"grp": Categorical(("lo", "mid", "hi"))})
        design = build_design(d, ModelSpec(("grp",)))
        assert design.k == 2
        assert design.column_names == ("grp[mid]", "grp[hi]")
        # hand-built dummy columns against the first label, centered
        raw_mid = np.array([0, 1, 0, 0, 1, 0], dtype=float)
        raw_hi = np.array([0, 0, 1, 0, 0, 1], dtype=float)
        assert np.allclose(design.matrix[:, 0], raw_mid - raw_mid.mean())
        assert np.allclose(design.matrix[:, 1], raw_hi - raw_hi.mean())
        assert np.abs(design.matrix.sum(axis=0)).max() <= 1e-12

    def test_constant_covariate_rejected(self):
        text = "trt,age\nA,5\nA,5\nB,5\n"
        d = _load(text, {"age": Continuous()})
        with pytest.raises(ConstantColumn):
            build_design(d, ModelSpec(("age",)))

    def test_column_sums_vanish_for_random_data(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            n = int(rng.integers(4, 40))
            vals = rng.normal(50, 20, size=n)
            d = Dataset(
                treatment_name="trt",
                arms=("A", "B"),
                treatment=("A",) + tuple(rng.choice(["A", "B"], size=n - 2)) + ("B",),
                covariates=(Covariate("x", Continuous(), tuple(vals)),),
            )
            design = build_design(d, ModelSpec(("x",)))
            scale = max(1.0, np.abs(design.matrix).max())
            assert abs(design.matrix.sum()) <= 1e-10 * n * scale

    def test_reference_level_changes_columns_not_span(self):
        rng = np.random.default_rng(9)
        n = 18
        levels = ["a", "b", "c"]
        values = tuple(rng.choice(levels, size=n))
        while len(set(values)) < 3:
            values = tuple(rng.choice(levels, size=n))
        treatment = ("A",) + tuple(rng.choice(["A", "B"], size=n - 2)) + ("B",)
        y = rng.standard_normal(n)
        fits = []
        for ref_order in (("a", "b", "c"), ("c", "a", "b")):
            d = Dataset(
                treatment_name="trt", arms=("A", "B"), treatment=treatment,
                covariates=(Covariate("g", Categorical(ref_order), values),),
            )
            design = build_design(d, ModelSpec(("g",)))
            x = np.column_stack([np.ones(n), design.matrix])
            fits.append(least_squares(x, y, center_y=True))
        assert np.allclose(fits[0].fitted, fits[1].fitted, atol=1e-10)
        assert fits[0].r_squared == pytest.approx(fits[1].r_squared, abs=1e-10)


class TestEnumerateModels:
    def test_five_covariates_give_32_models(self):
        models = enumerate_models(["a", "b", "c", "d", "e"])
        assert len(models) == 32

    def test_size_histogram(self):
        models = enumerate_models(["a", "b", "c", "d", "e"])
        hist = [sum(1 for m in models if len(m.covariate_names) == s) for s in range(6)]
        assert hist == [1, 5, 10, 10, 5, 1]

    def test_empty_set(self):
        models = enumerate_models([])
        assert models == [ModelSpec(())]

    def test_no_duplicates_and_power_of_two(self):
        for k in range(0, 7):
            names = [f"c{i}" for i in range(k)]
            models = enumerate_models(names)
            assert len(models) == 2**k
            assert len({m.covariate_names for m in models}) == 2**k

    def test_ordering_size_then_lexicographic(self):
        models = enumerate_models(["b", "a"])
        assert [m.covariate_names for m in models] == [(), ("a",), ("b",), ("b", "a")]

    def test_guard(self):
        with pytest.raises(TooManyCovariates):
            enumerate_models([f"c{i}" for i in range(21)])


class TestSampleMoments:
    def test_balanced_binary(self):
        text = "trt,sex\nA,M\nA,F\nB,M\nB,F\n"
        d = _load(text, {"sex": Binary(("M", "F"))})
        mom = sample_moments(d, ModelSpec(("sex",)))
        # coded (-1/2,+1/2,-1/2,+1/2): mean 0, sample variance 1/3
        assert mom.mean[0] == pytest.approx(0.0, abs=1e-15)
        assert mom.covariance[0, 0] == pytest.approx(1 / 3, abs=1e-15)

    def test_constant_column_flagged(self):
        text = "trt,age,x\nA,1,7\nA,2,7\nB,3,7\nB,4,7\n"
        d = _load(text, {"age": Continuous(), "x": Continuous()})
        mom = sample_moments(d, ModelSpec(("age", "x")))
        assert mom.covariance[1, 1] == 0.0
        assert mom.constant_columns == ("x",)

    def test_duplicated_columns_share_covariance(self):
        text = "trt,a,b\nA,1,1\nA,2,2\nB,3,3\nB,5,5\n"
        d = _load(text, {"a": Continuous(), "b": Continuous()})
        mom = sample_moments(d, ModelSpec(("a", "b")))
        assert mom.covariance[0, 1] == pytest.approx(mom.covariance[0, 0], abs=1e-12)

    def test_categorical_unsupported(self):
        text = "trt,g\nA,x\nA,y\nB,z\nB,x\n"
        d = _load(text, {"g": Categorical(("x", "y", "z"))})
        with pytest.raises(CategoricalUnsupported):
            sample_moments(d, ModelSpec(("g",)))


class TestCorrelationReport:
    def _dataset(self, cols, outcome, treatment):
        covs = tuple(Covariate(n, Continuous(), tuple(v)) for n, v in cols.items())
        return Dataset(
            treatment_name="trt",
            arms=tuple(dict.fromkeys(treatment)),
            treatment=tuple(treatment),
            covariates=covs,
            outcome_name="y",
            outcome=tuple(outcome),
        )

    def test_covariate_identical_to_outcome(self):
        rng = np.random.default_rng(12)
        y = rng.standard_normal(20)
        treatment = ["A"] * 10 + ["B"] * 10
        d = self._dataset({"x": y}, y, treatment)
        rep = correlation_report(d)
        assert rep.rows[0].outcome_ordinary == pytest.approx(1.0, abs=1e-12)

    def test_against_bruteforce_residual_oracle(self):
        rng = np.random.default_rng(31)
        n = 24
        a = rng.standard_normal(n)
        b = 0.5 * a + rng.standard_normal(n)
        y = a - b + rng.standard_normal(n)
        treatment = list(rng.choice(["A", "B"], size=n - 2)) + ["A", "B"]
        d = self._dataset({"a": a, "b": b}, y, treatment)
        rep = correlation_report(d)

        def brute_partial(target, xj, others):
            x = np.column_stack([np.ones(n), others])
            rt = target - x @ np.linalg.lstsq(x, target, rcond=None)[0]
            rx = xj - x @ np.linalg.lstsq(x, xj, rcond=None)[0]
            return float(np.corrcoef(rt, rx)[0, 1])

        z = d.indicator()
        assert rep.rows[0].outcome_partial == pytest.approx(
            brute_partial(y, a, b[:, None]), abs=1e-10)
        assert rep.rows[1].outcome_partial == pytest.approx(
            brute_partial(y, b, a[:, None]), abs=1e-10)
        assert rep.rows[0].treatment_partial == pytest.approx(
            brute_partial(z, a, b[:, None]), abs=1e-10)
        assert rep.rows[0].outcome_ordinary == pytest.approx(
            float(np.corrcoef(a, y)[0, 1]), abs=1e-12)

    def test_report_shape_mirrors_covariate_order(self):
        rng = np.random.default_rng(8)
        n = 12
        cols = {name: rng.standard_normal(n) for name in ("sex", "age", "baseline", "height", "weight")}
        y = rng.standard_normal(n)
        treatment = ["A", "B"] * 6
        rep = correlation_report(self._dataset(cols, y, treatment))
        assert [r.name for r in rep.rows] == ["sex", "age", "baseline", "height", "weight"]
        for r in rep.rows:
            for v in (r.outcome_ordinary, r.treatment_ordinary, r.outcome_partial, r.treatment_partial):
                assert -1.0 <= v <= 1.0

    def test_degenerate_residual(self):
        # second covariate is an exact linear function of the first
        n = 10
        a = np.arange(n, dtype=float)
        d = self._dataset({"a": a, "b": 2 * a + 1}, np.arange(n, dtype=float),
                          ["A", "B"] * 5)
        with pytest.raises(DegenerateResponse):
            correlation_report(d)

    def test_requires_outcome(self):
        d = _load(FOUR_ROWS, SCHEMA_SA)
        with pytest.raises(ValueError):
            correlation_report(d)


class TestDesignFromColumns:
    def test_rank_of_duplicated_column(self):
        rng = np.random.default_rng(6)
        col = rng.standard_normal(10)
        design = design_from_columns(np.column_stack([col, col]), ["u", "v"])
        assert design.k == 2 and design.rank == 1
