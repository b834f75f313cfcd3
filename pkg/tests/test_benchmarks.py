from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from depthmon.benchmarks import (
    BENCHMARK_LABELS,
    BenchmarkMethod,
    CentralityScorer,
    Orientation,
    iforest_fit,
    iforest_score,
    kdeos_score,
    lof_score,
    mdis_score,
    natural_neighbour_eigenvalue,
    nof_score,
    score_to_centrality,
)
from depthmon.charting import r_statistic
from depthmon.depth import ReferenceSet
from depthmon.errors import ConfigError, DataError, NumericError

from oracles import brute_eigenvalue, brute_kdeos, brute_lof


@pytest.fixture(scope="module")
def cluster():
    return np.random.default_rng(0).uniform(-1, 1, (50, 2))


# ---------------------------------------------------------------- LOF


class TestLof:
    @pytest.mark.parametrize("k", [1, 5, 20, 49])
    def test_matches_oracle(self, cluster, k):
        q = np.random.default_rng(1).uniform(-2, 2, (8, 2))
        np.testing.assert_allclose(lof_score(q, cluster, k), brute_lof(q, cluster, k), rtol=1e-9)

    def test_inside_and_far(self, cluster):
        inside = np.tile([[0.05, -0.02]], (10, 1))
        scores = lof_score(inside, cluster, 10)
        assert np.all(np.abs(scores - 1.0) <= 0.2)
        assert np.all(scores == scores[0])
        far = lof_score([[100.0, 100.0]], cluster, 10)
        assert far[0] > 5
        np.testing.assert_allclose(far, brute_lof([[100.0, 100.0]], cluster, 10), rtol=1e-9)

    def test_center_of_symmetric_fixture(self):
        theta = np.linspace(0, 2 * np.pi, 12, endpoint=False)
        ring = np.column_stack([np.cos(theta), np.sin(theta)])
        assert lof_score([[0.0, 0.0]], ring, 11)[0] <= 1 + 1e-6

    def test_duplicates_stay_finite(self):
        ref = np.vstack([np.zeros((10, 2)), np.random.default_rng(2).standard_normal((10, 2))])
        scores = lof_score(np.zeros((1, 2)), ref, 5)
        assert np.all(np.isfinite(scores))

    def test_homogeneous_mean_near_one(self):
        rng = np.random.default_rng(3)
        ref = rng.uniform(0, 1, (400, 2))
        q = rng.uniform(0.2, 0.8, (200, 2))
        assert 0.9 <= lof_score(q, ref, 20).mean() <= 1.2

    @pytest.mark.parametrize("k", [0, 50])
    def test_k_range(self, cluster, k):
        with pytest.raises(ConfigError):
            lof_score([[0.0, 0.0]], cluster, k)


# ---------------------------------------------------------------- KDEOS


class TestKdeos:
    def test_matches_oracle(self, cluster):
        q = np.random.default_rng(4).uniform(-1.5, 1.5, (5, 2))
        np.testing.assert_allclose(kdeos_score(q, cluster, "gaussian", 3, 8), brute_kdeos(q, cluster, 3, 8), rtol=1e-9)

    @pytest.mark.parametrize("seed", range(5))
    def test_remote_query_above_99th_percentile(self, seed):
        ref = np.random.default_rng(seed).standard_normal((50, 2)) * 0.3
        ref_scores = kdeos_score(ref, ref)
        assert kdeos_score([[6.0, 6.0]], ref)[0] > np.percentile(ref_scores, 99)

    @pytest.mark.xfail(
        strict=True,
        reason="the score z-scores a density against its own neighbours, so a modal query "
        "scores near zero rather than in the lowest decile",
    )
    def test_mode_below_10th_percentile(self):
        below = []
        for seed in range(5):
            ref = np.random.default_rng(seed).standard_normal((50, 2)) * 0.3
            ref_scores = kdeos_score(ref, ref)
            below.append(kdeos_score([[0.0, 0.0]], ref)[0] < np.percentile(ref_scores, 10))
        assert all(below)

    def test_single_k_is_that_estimate(self, cluster):
        q = np.array([[0.3, 0.1], [1.5, -1.2]])
        np.testing.assert_allclose(kdeos_score(q, cluster, k_min=7, k_max=7), brute_kdeos(q, cluster, 7, 7), rtol=1e-9)

    @pytest.mark.parametrize("kernel", ["gaussian", "epanechnikov"])
    def test_duplicates_stay_finite(self, kernel):
        ref = np.vstack([np.ones((25, 2)), np.random.default_rng(6).standard_normal((25, 2))])
        assert np.all(np.isfinite(kdeos_score(np.ones((2, 2)), ref, kernel)))

    def test_rejects(self, cluster):
        with pytest.raises(ConfigError):
            kdeos_score([[0.0, 0.0]], cluster, k_min=6, k_max=5)
        with pytest.raises(ConfigError):
            kdeos_score([[0.0, 0.0]], cluster, kernel="box")


# ---------------------------------------------------------------- iForest


@pytest.fixture(scope="module")
def two_clusters():
    rng = np.random.default_rng(7)
    return np.vstack([rng.standard_normal((100, 2)) * 0.3, rng.standard_normal((100, 2)) * 0.3 + [4.0, 4.0]])


class TestIForest:
    def test_deep_and_isolated(self, two_clusters):
        forest = iforest_fit(two_clusters, trees=100, subsample=64, seed=0)
        assert iforest_score([[0.0, 0.0]], forest)[0] < 0.5
        assert iforest_score([[10.0, -10.0]], forest)[0] > 0.6

    def test_deterministic(self, two_clusters):
        q = np.array([[1.0, 1.0], [2.0, 3.0]])
        a = iforest_score(q, iforest_fit(two_clusters, 20, 32, seed=3))
        b = iforest_score(q, iforest_fit(two_clusters, 20, 32, seed=3))
        np.testing.assert_array_equal(a, b)

    def test_degenerate_bounds(self, two_clusters):
        s = iforest_score([[0.0, 0.0], [9.0, 9.0]], iforest_fit(two_clusters, trees=1, subsample=2, seed=0))
        assert np.all((s > 0) & (s < 1))

    @pytest.mark.parametrize("trees,subsample", [(0, 10), (10, 1), (10, 500)])
    def test_rejects(self, two_clusters, trees, subsample):
        with pytest.raises(ConfigError):
            iforest_fit(two_clusters, trees, subsample)


# ---------------------------------------------------------------- MDis


class TestMdis:
    def test_hand_value(self):
        assert mdis_score([1.5], [0.0, 1.0])[0] == pytest.approx(2.0, abs=1e-15)

    def test_mean_and_symmetry(self):
        ref = np.array([0.2, 0.5, 0.9, 0.4])
        m = ref.mean()
        assert mdis_score([m], ref)[0] == 0.0
        assert mdis_score([m + 0.3], ref)[0] == pytest.approx(mdis_score([m - 0.3], ref)[0], rel=1e-12)

    def test_zero_variance(self):
        with pytest.raises(NumericError):
            mdis_score([1.0], [0.5, 0.5, 0.5])

    def test_multivariate_is_quadratic_form(self, cluster):
        q = np.array([[0.3, -0.2]])
        cov = np.cov(cluster.T)
        diff = q[0] - cluster.mean(axis=0)
        assert mdis_score(q, cluster)[0] == pytest.approx(diff @ np.linalg.solve(cov, diff), rel=1e-12)


# ---------------------------------------------------------------- NOF


class TestNof:
    @pytest.mark.parametrize("seed", range(4))
    def test_eigenvalue_matches_reverse_neighbour_scan(self, seed):
        ref = np.random.default_rng(seed).standard_normal((30, 2))
        lam, capped = natural_neighbour_eigenvalue(ref)
        assert lam == brute_eigenvalue(ref) and not capped

    def test_uniform_grid(self):
        grid = np.arange(21.0)[:, None]
        lam, _ = natural_neighbour_eigenvalue(grid)
        assert lam <= 3 and lam == brute_eigenvalue(grid)
        assert nof_score([[10.0]], grid)[0] == pytest.approx(1.0, abs=0.1)

    def test_far_query_exceeds_reference(self, cluster):
        lam, _ = natural_neighbour_eigenvalue(cluster)
        far = nof_score([[30.0, 0.0]], cluster)[0]
        ref_scores = brute_lof(cluster, cluster, lam)
        assert far > ref_scores.max()
        np.testing.assert_allclose(nof_score(cluster[:5] + 1e-3, cluster), brute_lof(cluster[:5] + 1e-3, cluster, lam), rtol=1e-9)

    def test_three_points(self):
        ref = np.array([[0.0], [1.0], [3.0]])
        lam, _ = natural_neighbour_eigenvalue(ref)
        assert lam in (1, 2)
        assert np.isfinite(nof_score([[2.0]], ref)[0])

    def test_isolated_point_pushes_lambda_to_the_cap(self):
        # the far point is nobody's neighbour until every point is
        ref = np.array([[0.0, 0.0], [0.1, 0.0], [0.0, 0.1], [5.0, 0.0]])
        lam, capped = natural_neighbour_eigenvalue(ref)
        assert lam == brute_eigenvalue(ref) == 3
        assert not capped


# ---------------------------------------------------------------- orientation and scorer


class TestCentrality:
    def test_examples(self):
        assert score_to_centrality(Orientation.HIGHER_IS_OUTLYING, 2.0) == -2.0
        assert score_to_centrality(Orientation.HIGHER_IS_CENTRAL, 0.7) == 0.7

    @given(st.lists(st.integers(0, 6), min_size=20, max_size=20), st.integers(0, 6))
    def test_rank_identity(self, ref_scores, q):
        ref = np.array(ref_scores, dtype=float)
        r = r_statistic(score_to_centrality(Orientation.HIGHER_IS_OUTLYING, float(q)),
                        score_to_centrality(Orientation.HIGHER_IS_OUTLYING, ref))
        strictly_lower = sum(s < q for s in ref_scores)
        assert r == pytest.approx(1 - strictly_lower / 20, abs=1e-15)

    @pytest.mark.parametrize("label", BENCHMARK_LABELS)
    def test_fitted_scorer_is_deterministic(self, label, cluster):
        ref = ReferenceSet.from_points(cluster[:, :1] if label in ("MDis", "NOF") else cluster)
        scorer = CentralityScorer(label)
        q = ref.points[:7] + 0.01
        a, b = scorer.fit(ref), scorer.fit(ref)
        np.testing.assert_array_equal(a.centrality(q), b.centrality(q))
        np.testing.assert_array_equal(a.reference_centrality, -a.reference_scores)
        r = r_statistic(a.centrality(q), a.reference_centrality)
        assert np.all((r >= 0) & (r <= 1))
        in_sample = r_statistic(a.reference_centrality, a.reference_centrality)
        assert np.all(in_sample > 0)

    def test_scorer_config(self):
        assert CentralityScorer("MDis").feature == "softmax"
        assert CentralityScorer("LOF").params["k"] == 20
        s = CentralityScorer(BenchmarkMethod.KDEOS, {"k_max": 10})
        assert CentralityScorer.from_dict(s.to_dict()) == s
        with pytest.raises(ConfigError):
            CentralityScorer("LOF", {"bandwidth": 1})
        with pytest.raises(ConfigError):
            CentralityScorer("LOF", feature="logits")

    def test_dimension_mismatch(self, cluster):
        fitted = CentralityScorer("LOF").fit(ReferenceSet.from_points(cluster))
        with pytest.raises(DataError):
            fitted.score(np.zeros((1, 3)))
