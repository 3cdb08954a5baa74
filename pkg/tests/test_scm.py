import numpy as np
import pytest

from dedact.errors import CyclicGraph, DimensionMismatch
from dedact.scm import (
    CENSUS_MEDIATORS,
    LinearSCM,
    biomarker_scm,
    census_scm,
    d_separated,
    sample_scm,
)


def _chain(noise_b=1.0):
    return LinearSCM(
        nodes=("a", "b", "y"),
        edges={("a", "b"): 2.0, ("b", "y"): 1.0},
        noise_std={"a": 1.0, "b": noise_b, "y": 1.0},
        roles={"a": "feature", "b": "feature", "y": "target"},
    )


class TestValidation:
    def test_cycle_rejected(self):
        with pytest.raises(CyclicGraph):
            LinearSCM(
                nodes=("a", "b", "y"),
                edges={("a", "b"): 1.0, ("b", "a"): 1.0},
                noise_std={"a": 1.0, "b": 1.0, "y": 1.0},
                roles={"a": "feature", "b": "feature", "y": "target"},
            )

    def test_duplicate_nodes_rejected(self):
        with pytest.raises(DimensionMismatch):
            LinearSCM(
                nodes=("a", "a", "y"),
                edges={},
                noise_std={"a": 1.0, "y": 1.0},
                roles={"a": "feature", "y": "target"},
            )

    def test_unknown_edge_endpoint_rejected(self):
        with pytest.raises(DimensionMismatch):
            LinearSCM(
                nodes=("a", "y"),
                edges={("a", "zz"): 1.0},
                noise_std={"a": 1.0, "y": 1.0},
                roles={"a": "feature", "y": "target"},
            )

    def test_bad_role_rejected(self):
        with pytest.raises(DimensionMismatch):
            LinearSCM(
                nodes=("a", "y"),
                edges={},
                noise_std={"a": 1.0, "y": 1.0},
                roles={"a": "covariate", "y": "target"},
            )

    def test_negative_noise_rejected(self):
        with pytest.raises(DimensionMismatch):
            LinearSCM(
                nodes=("a", "y"),
                edges={},
                noise_std={"a": -1.0, "y": 1.0},
                roles={"a": "feature", "y": "target"},
            )

    def test_exactly_one_supervision_node(self):
        with pytest.raises(DimensionMismatch):
            LinearSCM(
                nodes=("a", "b"),
                edges={},
                noise_std={"a": 1.0, "b": 1.0},
                roles={"a": "feature", "b": "feature"},
            )
        with pytest.raises(DimensionMismatch):
            LinearSCM(
                nodes=("a", "b"),
                edges={},
                noise_std={"a": 1.0, "b": 1.0},
                roles={"a": "target", "b": "label"},
            )

    def test_nodes_reordered_topologically(self):
        scm = LinearSCM(
            nodes=("y", "b", "a"),
            edges={("a", "b"): 1.0, ("b", "y"): 1.0},
            noise_std={"a": 1.0, "b": 1.0, "y": 1.0},
            roles={"a": "feature", "b": "feature", "y": "target"},
        )
        order = {n: i for i, n in enumerate(scm.nodes)}
        assert order["a"] < order["b"] < order["y"]


class TestImpliedCovariance:
    def test_matches_sampled_covariance(self):
        scm = _chain()
        data, target = sample_scm(scm, n=50000, seed=1)
        pooled = np.column_stack([data.values, target.values])
        emp = np.cov(pooled, rowvar=False)
        idx = [scm.nodes.index(n) for n in ("a", "b", "y")]
        implied = scm.implied_covariance()[np.ix_(idx, idx)]
        n = pooled.shape[0]
        for i in range(3):
            for j in range(3):
                se = np.sqrt((emp[i, i] * emp[j, j] + emp[i, j] ** 2) / n)
                assert abs(emp[i, j] - implied[i, j]) < 5 * se

    def test_noiseless_child_equals_scaled_parent(self):
        scm = _chain(noise_b=0.0)
        cov = scm.implied_covariance()
        ia, ib = scm.nodes.index("a"), scm.nodes.index("b")
        # b = 2a exactly: var(b) = 4 var(a), cov(a, b) = 2 var(a)
        assert cov[ib, ib] == pytest.approx(4.0 * cov[ia, ia])
        assert cov[ia, ib] == pytest.approx(2.0 * cov[ia, ia])
        data, _ = sample_scm(scm, n=100, seed=0)
        assert np.allclose(data.values[:, data.index_of("b")], 2.0 * data.values[:, data.index_of("a")])

    def test_no_edges_gives_diagonal(self):
        scm = LinearSCM(
            nodes=("a", "b", "y"),
            edges={},
            noise_std={"a": 1.0, "b": 2.0, "y": 1.0},
            roles={"a": "feature", "b": "feature", "y": "target"},
        )
        cov = scm.implied_covariance()
        assert np.allclose(cov, np.diag([s ** 2 for s in (1.0, 2.0, 1.0)][: len(scm.nodes)])[
            np.ix_(range(3), range(3))
        ]) or np.allclose(cov - np.diag(np.diag(cov)), 0.0)
        ib = scm.nodes.index("b")
        assert cov[ib, ib] == pytest.approx(4.0)


class TestSampling:
    def test_seed_determinism(self):
        scm = _chain()
        d1, t1 = sample_scm(scm, n=100, seed=7)
        d2, t2 = sample_scm(scm, n=100, seed=7)
        assert np.array_equal(d1.values, d2.values)
        assert np.array_equal(t1.values, t2.values)

    def test_different_seeds_differ(self):
        scm = _chain()
        d1, _ = sample_scm(scm, n=100, seed=1)
        d2, _ = sample_scm(scm, n=100, seed=2)
        assert not np.array_equal(d1.values, d2.values)


class TestBiomarkerScm:
    def test_default_columns_are_exactly_b_and_c(self):
        scm = biomarker_scm()
        data, _ = sample_scm(scm, n=100, seed=0)
        assert set(data.column_names) == {"B", "C"}

    def test_include_observed_adds_psa(self):
        scm = biomarker_scm()
        data, _ = sample_scm(scm, n=100, seed=0, include_observed=True)
        assert set(data.column_names) == {"B", "C", "P"}
        assert "Y" not in data.column_names and "L" not in data.column_names

    def test_c_p_correlation(self):
        # P = C + noise with unit variances: corr(C, P) = 1/sqrt(2)
        data, _ = sample_scm(biomarker_scm(), n=50000, seed=3, include_observed=True)
        c = data.values[:, data.index_of("C")]
        p = data.values[:, data.index_of("P")]
        assert np.corrcoef(c, p)[0, 1] == pytest.approx(1.0 / np.sqrt(2.0), abs=0.02)

    def test_cycling_correlates_with_label(self):
        data, target = sample_scm(biomarker_scm(), n=50000, seed=4)
        c = data.values[:, data.index_of("C")]
        assert np.corrcoef(c, target.values)[0, 1] > 0.2

    def test_model_feature_indices_exclude_observed(self):
        scm = biomarker_scm()
        cols = scm.data_columns(include_observed=True)
        support = scm.model_feature_indices(include_observed=True)
        assert {cols[i] for i in support} == {"B", "C"}


class TestCensusScm:
    def test_structure(self):
        scm = census_scm()
        g = scm.graph()
        for root, mediators in CENSUS_MEDIATORS.items():
            for m in mediators:
                assert g.has_edge(root, m)
                assert g.has_edge(m, "income")
        assert g.has_edge("race", "income")
        assert g.has_edge("sex", "income")
        assert not g.has_edge("age", "income")

    def test_age_weight_vanishes_in_full_ols(self):
        from dedact.core import fit_ols

        scm = census_scm()
        data, target = sample_scm(scm, n=100000, seed=5)
        pred = fit_ols(data, target)
        w_age = pred.weights[data.index_of("age")]
        assert abs(w_age) < 0.02

    def test_income_is_the_target(self):
        scm = census_scm()
        assert scm.supervision_node == "income"
        assert "income" not in scm.data_columns()


class TestDSeparation:
    def test_biomarker_examples(self):
        scm = biomarker_scm()
        # P and B are marginally independent
        assert d_separated(scm, "P", None, "B")
        # conditioning on the collider L opens the path
        assert not d_separated(scm, "P", "L", "B")
        # C reaches L only through P
        assert d_separated(scm, "C", "P", "L")
        assert not d_separated(scm, "C", None, "L")

    def test_census_mediator_blocking(self):
        scm = census_scm()
        assert d_separated(scm, "age", CENSUS_MEDIATORS["age"], "income")
        assert not d_separated(scm, "age", None, "income")
        # race has a direct edge: no mediator set blocks it
        assert not d_separated(scm, "race", CENSUS_MEDIATORS["race"], "income")

    def test_agrees_with_partial_correlation(self):
        scm = biomarker_scm()
        nodes = list(scm.nodes)
        cov = scm.implied_covariance()

        def partial_corr(x, y, given):
            idx = [nodes.index(x), nodes.index(y)] + [nodes.index(g) for g in given]
            sub = cov[np.ix_(idx, idx)]
            prec = np.linalg.inv(sub + 1e-12 * np.eye(len(idx)))
            return -prec[0, 1] / np.sqrt(prec[0, 0] * prec[1, 1])

        cases = [("P", "B", []), ("C", "L", ["P"]), ("C", "L", []), ("B", "L", [])]
        for x, y, given in cases:
            sep = d_separated(scm, x, given or None, y)
            rho = partial_corr(x, y, given)
            if sep:
                assert abs(rho) < 1e-10
            else:
                assert abs(rho) > 0.05


class TestConfigRoundTrip:
    def test_round_trip_preserves_everything(self):
        for scm in (biomarker_scm(), census_scm(), _chain()):
            clone = LinearSCM.from_config(scm.to_config())
            assert clone.nodes == scm.nodes
            assert clone.edges == scm.edges
            assert clone.noise_std == scm.noise_std
            assert clone.roles == scm.roles
            d1, t1 = sample_scm(scm, n=50, seed=9)
            d2, t2 = sample_scm(clone, n=50, seed=9)
            assert np.array_equal(d1.values, d2.values)
            assert np.array_equal(t1.values, t2.values)
