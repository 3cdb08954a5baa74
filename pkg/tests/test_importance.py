import numpy as np
import pytest

from dedact.core import (
    CROSS_ENTROPY,
    DataMatrix,
    FeatureIndexSet,
    LinearPredictor,
    TargetVector,
)
from dedact.errors import DimensionMismatch, DisjointnessViolation
from dedact.importance import (
    ImportanceEvaluator,
    MeasureSpec,
    evaluation_count,
    reset_evaluation_count,
)
from dedact.sampler import GaussianModel


def _gaussian_data(cov, n, seed):
    cov = np.asarray(cov, dtype=float)
    rng = np.random.default_rng(seed)
    values = rng.standard_normal((n, cov.shape[0])) @ np.linalg.cholesky(cov).T
    return DataMatrix(values, tuple(f"x{i}" for i in range(cov.shape[0])))


def _evaluator(cov, weights, n=50000, seed=0, target_weights=None, noise=0.0, **kw):
    """Linear model on correlated Gaussian columns with a linear target."""
    data = _gaussian_data(cov, n, seed)
    rng = np.random.default_rng(seed + 1)
    tw = np.asarray(weights if target_weights is None else target_weights, dtype=float)
    y = TargetVector(data.values @ tw + noise * rng.standard_normal(n))
    pred = LinearPredictor(weights=np.asarray(weights, dtype=float), intercept=0.0)
    g = GaussianModel(mean=np.zeros(len(weights)), cov=np.asarray(cov, dtype=float))
    return ImportanceEvaluator(data, y, pred, g, seed=seed, **kw)


def _near_zero(est, factor=4.0):
    return abs(est.value) <= max(factor * est.std_error, 1e-12)


class TestMeasureSpec:
    def test_unknown_measure(self):
        with pytest.raises(DimensionMismatch):
            MeasureSpec("XX", FeatureIndexSet.of([0]), FeatureIndexSet.empty())

    def test_unknown_mode(self):
        with pytest.raises(DimensionMismatch):
            MeasureSpec("DI", FeatureIndexSet.of([0]), FeatureIndexSet.empty(), mode="weird")

    def test_interest_baseline_overlap(self):
        with pytest.raises(DisjointnessViolation):
            MeasureSpec("DI", FeatureIndexSet.of([0]), FeatureIndexSet.of([0, 1]))

    def test_n_mc_positive(self):
        with pytest.raises(DimensionMismatch):
            MeasureSpec("DI", FeatureIndexSet.of([0]), FeatureIndexSet.empty(), n_mc=0)


class TestDirectImportance:
    def test_two_feature_oracle(self):
        # y = x0 + x1 exactly, independent columns: DI(x0 | x1) = E[(x~0 - x0)^2] = 2
        ev = _evaluator(np.eye(2), [1.0, 1.0], n=100000)
        est = ev.direct_importance([0], [1])
        assert abs(est.value - 2.0) <= 3 * est.std_error + 6.0 / np.sqrt(100000)

    def test_unused_feature_has_no_direct_importance(self):
        ev = _evaluator(np.array([[1.0, 0.5], [0.5, 1.0]]), [1.0, 0.0], n=20000)
        assert _near_zero(ev.direct_importance([1], []))
        assert _near_zero(ev.direct_importance([1], [0]))

    def test_empty_interest_is_exactly_zero(self):
        ev = _evaluator(np.eye(2), [1.0, 1.0], n=1000)
        est = ev.direct_importance([], [0])
        assert est.value == 0.0 and est.std_error == 0.0


class TestAssociativeImportance:
    def test_duplicate_column_oracle(self):
        # x1 = x0 exactly, model reads x1 only, y = x0: AI(x0 | empty) = 2
        n = 100000
        rng = np.random.default_rng(0)
        x0 = rng.standard_normal(n)
        data = DataMatrix(np.column_stack([x0, x0]), ("x0", "x1"))
        y = TargetVector(x0)
        pred = LinearPredictor(weights=np.array([0.0, 1.0]), intercept=0.0)
        g = GaussianModel(mean=np.zeros(2), cov=np.array([[1.0, 1.0], [1.0, 1.0]]))
        ev = ImportanceEvaluator(data, y, pred, g, seed=0)
        est = ev.associative_importance([0], [])
        assert abs(est.value - 2.0) <= 3 * est.std_error + 6.0 / np.sqrt(100000)

    def test_noise_variable_has_no_associative_importance(self):
        # x1 is pure noise, independent of y
        ev = _evaluator(np.eye(2), [1.0, 0.0], n=50000, noise=0.5)
        assert _near_zero(ev.associative_importance([1], []))
        assert _near_zero(ev.associative_importance([1], [0]))

    def test_empty_interest_is_exactly_zero(self):
        ev = _evaluator(np.eye(2), [1.0, 1.0], n=1000)
        est = ev.associative_importance([], [1])
        assert est.value == 0.0 and est.std_error == 0.0


class TestDiFrom:
    def test_independent_source_contributes_nothing(self):
        ev = _evaluator(np.eye(2), [1.0, 1.0], n=50000)
        assert _near_zero(ev.di_from([0], [1], [1]))

    def test_self_source_equals_direct_importance_bitwise(self):
        ev = _evaluator(np.array([[1.0, 0.3], [0.3, 1.0]]), [1.0, 1.0], n=20000)
        di = ev.direct_importance([0], [1], seed=5)
        df = ev.di_from([0], [1], [0], seed=5)
        assert df.value == di.value and df.std_error == di.std_error

    def test_empty_source_is_exactly_zero(self):
        ev = _evaluator(np.eye(2), [1.0, 1.0], n=1000)
        est = ev.di_from([0], [1], [])
        assert est.value == 0.0 and est.std_error == 0.0

    def test_monotone_in_sources(self):
        cov = np.array([
            [1.0, 0.6, 0.3],
            [0.6, 1.0, 0.2],
            [0.3, 0.2, 1.0],
        ])
        ev = _evaluator(cov, [1.0, 0.5, 0.5], n=30000)
        small = ev.di_from([0], [1, 2], [1], seed=9)
        large = ev.di_from([0], [1, 2], [1, 2], seed=9)
        combined = np.hypot(small.std_error, large.std_error)
        assert large.value >= small.value - 4 * combined


class TestAiVia:
    def test_full_pathway_equals_associative_importance_bitwise(self):
        ev = _evaluator(np.array([[1.0, 0.4], [0.4, 1.0]]), [1.0, 1.0], n=20000)
        ai = ev.associative_importance([0], [], seed=3)
        via = ev.ai_via([0], [], [0, 1], seed=3)
        assert via.value == ai.value and via.std_error == ai.std_error

    def test_pathway_through_unused_feature_is_blocked(self):
        # x1 carries x0's signal but the model ignores x1
        cov = np.array([[1.0, 0.9], [0.9, 1.0]])
        ev = _evaluator(cov, [1.0, 0.0], n=30000)
        assert _near_zero(ev.ai_via([0], [], [1]))

    def test_proxy_pathway_carries_leakage(self):
        # model reads only x1 (a proxy of x0); the pathway via x1 is the whole AI
        cov = np.array([[1.0, 0.8], [0.8, 1.0]])
        ev = _evaluator(cov, [0.0, 1.0], n=50000, target_weights=[1.0, 0.0])
        ai = ev.associative_importance([0], [], seed=4)
        via = ev.ai_via([0], [], [1], seed=4)
        assert via.value > 0
        assert via.value == pytest.approx(ai.value, abs=4 * np.hypot(ai.std_error, via.std_error) + 1e-9)


class TestNamedSpecialCases:
    def test_pfi_delegates_to_direct_importance(self):
        ev = _evaluator(np.eye(3), [1.0, 2.0, 0.0], n=10000)
        a = ev.pfi(1, seed=2)
        b = ev.direct_importance([1], [0, 2], seed=2)
        assert a.value == b.value

    def test_conditional_fi_delegates(self):
        ev = _evaluator(np.eye(3), [1.0, 2.0, 0.0], n=10000)
        a = ev.conditional_fi(1, seed=2)
        b = ev.associative_importance([1], [0, 2], seed=2)
        assert a.value == b.value

    def test_sage_values_run_both_variants(self):
        ev = _evaluator(np.eye(2), [1.0, 1.0], n=5000, n_mc=5)
        for variant in ("marginal", "conditional"):
            est = ev.sage_value([0], variant=variant)
            assert est.mode == "marginalized"
            assert est.value > 0
        with pytest.raises(DimensionMismatch):
            ev.sage_value([0], variant="other")

    def test_sage_attribution_single_feature(self):
        ev = _evaluator(np.eye(1), [1.0], n=5000, n_mc=5)
        attr = ev.sage_attribution(0, n_orders=3)
        solo = ev.sage_value([0])
        assert attr.value == pytest.approx(solo.value, abs=5 * (attr.std_error + solo.std_error) + 1e-9)

    def test_sage_attribution_additive_independent_is_order_free(self):
        ev = _evaluator(np.eye(2), [1.0, 2.0], n=20000, n_mc=5)
        attr = ev.sage_attribution(1, n_orders=12)
        solo = ev.sage_value([1])
        assert attr.value == pytest.approx(solo.value, abs=5 * (attr.std_error + solo.std_error) + 0.05)

    def test_sage_attribution_dummy_feature(self):
        ev = _evaluator(np.eye(2), [1.0, 0.0], n=20000, n_mc=5)
        attr = ev.sage_attribution(1, n_orders=8)
        assert abs(attr.value) <= max(4 * attr.std_error, 1e-12)


class TestEngineContracts:
    def test_permutation_invariance_bitwise(self):
        cov = np.array([
            [1.0, 0.5, 0.2],
            [0.5, 1.0, 0.1],
            [0.2, 0.1, 1.0],
        ])
        data = _gaussian_data(cov, 5000, 11)
        y = TargetVector(data.values @ np.array([1.0, -1.0, 0.5]))
        perm = [2, 0, 1]  # new position p holds old column perm[p]
        data_p = DataMatrix(data.values[:, perm], tuple(data.column_names[i] for i in perm))
        cov_p = cov[np.ix_(perm, perm)]
        w = np.array([1.0, -1.0, 0.5])
        for mode in ("original_f", "marginalized"):
            ev = ImportanceEvaluator(
                data, y, LinearPredictor(weights=w, intercept=0.0),
                GaussianModel(mean=np.zeros(3), cov=cov), n_mc=3, seed=7, n_integration=4,
            )
            ev_p = ImportanceEvaluator(
                data_p, y, LinearPredictor(weights=w[perm], intercept=0.0),
                GaussianModel(mean=np.zeros(3), cov=cov_p), n_mc=3, seed=7, n_integration=4,
            )
            est = ev.evaluate(MeasureSpec("AI", FeatureIndexSet.of([0]), FeatureIndexSet.of([1]), mode=mode, n_mc=3, seed=7))
            est_p = ev_p.evaluate(MeasureSpec("AI", FeatureIndexSet.of([perm.index(0)]), FeatureIndexSet.of([perm.index(1)]), mode=mode, n_mc=3, seed=7))
            if mode == "original_f":
                assert est.value == est_p.value
            else:
                # the marginalized path averages columns in a different
                # summation order, so invariance holds to rounding only
                assert est.value == pytest.approx(est_p.value, rel=1e-12, abs=1e-12)

    def test_seed_determinism(self):
        ev = _evaluator(np.eye(2), [1.0, 1.0], n=2000, n_mc=4)
        a = ev.pfi(0, seed=3)
        b = ev.pfi(0, seed=3)
        assert a.value == b.value and a.std_error == b.std_error

    def test_std_error_definition(self):
        ev = _evaluator(np.eye(2), [1.0, 1.0], n=2000, n_mc=6)
        est = ev.pfi(0, seed=1)
        singles = [ev.pfi(0, n_mc=1, seed=1).value for _ in range(1)]
        assert est.n_mc == 6
        assert est.std_error > 0
        # a single-repetition estimate reports no spread
        one = ev.pfi(0, n_mc=1, seed=1)
        assert one.std_error == 0.0
        assert np.isfinite(singles[0])

    def test_evaluation_counter(self):
        ev = _evaluator(np.eye(2), [1.0, 1.0], n=2000, n_mc=2)
        reset_evaluation_count()
        ev.pfi(0)
        ev.associative_importance([0], [])
        assert evaluation_count() == 2

    def test_cross_entropy_loss_path(self):
        rng = np.random.default_rng(12)
        data = _gaussian_data(np.eye(2), 2000, 12)
        y = TargetVector((rng.random(2000) < 0.5).astype(float))
        pred = LinearPredictor(weights=np.array([0.01, 0.0]), intercept=0.5)
        ev = ImportanceEvaluator(
            data, y, pred, GaussianModel(mean=np.zeros(2), cov=np.eye(2)),
            loss=CROSS_ENTROPY, n_mc=3, seed=0,
        )
        est = ev.pfi(0)
        assert np.isfinite(est.value) and est.std_error >= 0

    def test_shape_validation(self):
        data = _gaussian_data(np.eye(2), 100, 0)
        y = TargetVector(np.zeros(99))
        pred = LinearPredictor(weights=np.array([1.0, 1.0]), intercept=0.0)
        with pytest.raises(DimensionMismatch):
            ImportanceEvaluator(data, y, pred, GaussianModel(mean=np.zeros(2), cov=np.eye(2)))
        with pytest.raises(DimensionMismatch):
            ImportanceEvaluator(
                data, TargetVector(np.zeros(100)), pred,
                GaussianModel(mean=np.zeros(3), cov=np.eye(3)),
            )
