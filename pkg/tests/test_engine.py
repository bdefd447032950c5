import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import argmin_assign, best_wss, wss
from rskmeans import (TRIMMED, DataMatrix, EmptyClusterError, FitOptions, Partition, assign_cases, cer,
                      kmeans, lloyd, rsk_means, sparse_kmeans, trimmed_kmeans, update_centers)
from rskmeans.engine import distances, trim_count
from rskmeans.simulation import generate_dataset


def blobs(seed=0, n_per=20, p=4, sep=6.0):
    rng = np.random.default_rng(seed)
    centers = np.zeros((3, p))
    centers[:, 0] = [-sep, 0, sep]
    centers[:, 1] = [sep, -sep, 0]
    labels = np.repeat(np.arange(3), n_per)
    return centers[labels] + rng.normal(size=(3 * n_per, p)), labels


class TestPartition:
    def test_sizes_and_trimmed(self):
        P = Partition([0, 1, TRIMMED, 1], 3)
        assert P.sizes().tolist() == [1, 2, 0]
        assert P.trimmed.tolist() == [False, False, True, False]

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            Partition([0, 2], 2)
        with pytest.raises(ValueError):
            Partition([0, -2], 2)


class TestDistances:
    def test_against_loops(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(12, 5))
        c = rng.normal(size=(3, 5))
        w = rng.uniform(size=5)
        d = distances(x, c, w)
        loops = np.array([[(w * (xi - ck) ** 2).sum() for ck in c] for xi in x])
        np.testing.assert_allclose(d, loops, rtol=1e-10, atol=1e-12)

    def test_missing_rescaled(self):
        x = np.array([[1.0, np.nan, 3.0, np.nan]])
        X = DataMatrix.from_array(np.vstack([x, np.zeros((1, 4))]))
        d = distances(X, np.zeros((1, 4)))
        # 10 over 2 observed features of 4
        assert d[0, 0] == pytest.approx(20.0)
        dw = distances(X, np.zeros((1, 4)), [1.0, 1.0, 0.0, 2.0])
        # weighted sum 1 over observed weight 1, total weight 4
        assert dw[0, 0] == pytest.approx(4.0)

    @pytest.mark.parametrize("seed", range(10))
    def test_assignment_matches_argmin_oracle(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(15, 4))
        x[rng.random(x.shape) < 0.2] = np.nan
        x[:, 0] = rng.normal(size=15)  # keep every row observed somewhere
        c = rng.normal(size=(3, 4))
        w = rng.uniform(0.1, 1, size=4)
        got = assign_cases(DataMatrix.from_array(x), c, w).labels
        assert got.tolist() == argmin_assign(x, c, w).tolist()

    def test_ties_to_lower_index(self):
        P = assign_cases(np.array([[0.0], [1.0]]), np.array([[-1.0], [1.0], [-1.0]]))
        assert P.labels.tolist() == [0, 1]


def test_update_centers():
    x = np.array([[0.0, 1.0], [2.0, 3.0], [10.0, 10.0], [99.0, 99.0]])
    c = update_centers(x, Partition([0, 0, 1, 1], 2), trimmed=[3])
    assert c.tolist() == [[1.0, 2.0], [10.0, 10.0]]
    with pytest.raises(EmptyClusterError):
        update_centers(x, Partition([0, 0, 0, 0], 2))


def test_update_centers_missing_falls_back_to_overall_mean():
    x = np.array([[0.0, np.nan], [2.0, np.nan], [10.0, 4.0], [12.0, 6.0]])
    c = update_centers(DataMatrix.from_array(x), Partition([0, 0, 1, 1], 2))
    assert c.tolist() == [[1.0, 5.0], [11.0, 5.0]]


def test_trim_count():
    assert trim_count(1 / 60, 60) == 1
    assert trim_count(0.1, 30) == 3
    assert trim_count(0.099, 30) == 2
    assert trim_count(0.0, 10) == 0


class TestLloyd:
    def test_trace_non_increasing(self):
        x, _ = blobs(2, sep=1.5)
        res = lloyd(x, x[:3], n_trim=4)
        assert np.all(np.diff(res.trace) <= 1e-9)
        assert res.trimmed.sum() == 4

    def test_fixed_point(self):
        x, labels = blobs(0)
        res = lloyd(x, update_centers(x, Partition(labels, 3)))
        assert res.labels.tolist() == labels.tolist()
        # one pass to recompute the centers, one to see nothing moved
        assert res.n_iter == 2

    def test_trimmed_objective(self):
        x = np.array([[0.0], [1.0], [10.0], [11.0], [100.0]])
        res = lloyd(x, np.array([[0.0], [10.0]]), n_trim=1)
        assert res.trimmed.tolist() == [False] * 4 + [True]
        assert res.objective == pytest.approx(1.0)

    def test_trim_ties_lower_index(self):
        x = np.array([[-1.0], [1.0], [5.0], [6.0]])
        res = lloyd(x, np.array([[0.0], [5.5]]), n_trim=1)
        assert np.flatnonzero(res.trimmed).tolist() == [0]

    def test_empty_cluster_repaired(self):
        x = np.array([[0.0], [1.0], [2.0], [10.0]])
        res = lloyd(x, np.array([[0.0], [100.0]]))
        assert set(res.labels.tolist()) == {0, 1}


class TestGlobalOptimum:
    @pytest.mark.parametrize("seed", range(6))
    def test_kmeans_reaches_enumerated_minimum(self, seed):
        rng = np.random.default_rng(seed)
        n = 4 + seed % 2
        x = rng.normal(size=(n, 2)) * 3
        fit = kmeans(x, 2, FitOptions(n_starts=30, seed=seed))
        assert fit.objective == pytest.approx(best_wss(x, 2), rel=1e-9)
        assert fit.objective == pytest.approx(wss(x, fit.partition.labels), rel=1e-9)

    @pytest.mark.parametrize("seed", range(6))
    def test_trimmed_reaches_enumerated_minimum(self, seed):
        rng = np.random.default_rng(50 + seed)
        x = rng.normal(size=(6, 2)) * 3
        fit = trimmed_kmeans(x, 2, 1 / 6, FitOptions(n_starts=50, seed=seed))
        assert len(fit.trimmed) == 1
        assert fit.objective == pytest.approx(best_wss(x, 2, n_trim=1), rel=1e-9)


class TestPlainFits:
    def test_kmeans_recovers_blobs(self):
        x, labels = blobs(1)
        fit = kmeans(x, 3, FitOptions(seed=1))
        assert fit.algorithm == "kmeans" and fit.weights is None
        assert len(set(zip(labels, fit.partition.labels))) == 3

    def test_deterministic(self):
        x, _ = blobs(3, sep=1.0)
        a = kmeans(x, 3, FitOptions(seed=9))
        b = kmeans(x, 3, FitOptions(seed=9))
        assert a.partition.labels.tobytes() == b.partition.labels.tobytes()
        assert a.centers.tobytes() == b.centers.tobytes()

    def test_init(self):
        x, labels = blobs(1)
        init = update_centers(x, Partition(labels, 3))
        fit = kmeans(x, 3, init=init)
        assert fit.partition.labels.tolist() == labels.tolist()

    def test_trimmed_marks_outliers(self):
        x, _ = blobs(1)
        x[5] += 50
        fit = trimmed_kmeans(x, 3, 0.05, FitOptions(seed=1))
        assert 5 in fit.trimmed
        assert fit.partition.labels[5] == TRIMMED
        assert fit.closest[5] >= 0
        assert len(fit.trimmed) == 3

    @pytest.mark.parametrize("K", [0, 61])
    def test_k_range(self, K):
        x, _ = blobs(0)
        with pytest.raises(ValueError):
            kmeans(x, K)

    def test_too_much_trimming(self):
        with pytest.raises(ValueError):
            trimmed_kmeans(np.arange(10.0).reshape(5, 2), 3, 0.6)

    def test_missing_data(self):
        x, labels = blobs(4)
        rng = np.random.default_rng(0)
        x[rng.random(x.shape) < 0.1] = np.nan
        x[:, 0] = np.where(np.isnan(x[:, 0]), 0.0, x[:, 0])
        fit = kmeans(DataMatrix.from_array(x), 3, FitOptions(seed=2))
        assert np.all(np.isfinite(fit.centers))
        assert len(set(zip(labels, fit.partition.labels))) == 3


class TestSparse:
    def test_weights_on_signal_features(self):
        x, labels = blobs(5, p=20)
        fit = sparse_kmeans(x, 3, 1.5, FitOptions(seed=0))
        w = fit.weights.w
        assert w[:2].sum() / w.sum() > 0.95
        assert fit.weights.w.sum() <= 1.5 + 1e-6
        assert len(set(zip(labels, fit.partition.labels))) == 3
        assert fit.trimmed == frozenset()
        assert fit.objective == pytest.approx(fit.trace[-1])

    def test_rsk_two_trim_sets(self):
        x, labels = blobs(6, p=10)
        x[0, 9] = 40.0  # outlier on a noise feature
        fit = rsk_means(x, 3, 1.5, 0.05, FitOptions(seed=0))
        assert len(fit.weighted_trim) == 3 and len(fit.euclidean_trim) == 3
        assert 0 in fit.euclidean_trim
        assert fit.weights.w[9] < 0.01 * fit.weights.w[:2].min()
        for i in fit.trimmed:
            assert fit.partition.labels[i] == TRIMMED

    def test_rsk_on_naive_demo_trims_contaminated_cases(self):
        X, _ = generate_dataset("naive_demo", 1)
        fit = rsk_means(X, 3, 1.4, 0.1, FitOptions(n_starts=20, seed=1))
        assert {0, 1, 2} <= fit.trimmed

    def test_bound_checked(self):
        x, _ = blobs(0)
        with pytest.raises(ValueError):
            sparse_kmeans(x, 3, 0.5)
        with pytest.raises(ValueError):
            rsk_means(x, 3, 2.1, 0.1)

    def test_rsk_trimming_limit(self):
        x, _ = blobs(0)
        with pytest.raises(ValueError):
            rsk_means(x, 3, 1.5, 0.49)

    def test_degenerate_flag(self):
        x = np.tile([[1.0, 2.0]], (6, 1))
        fit = sparse_kmeans(x, 2, 1.2)
        assert fit.degenerate


@settings(max_examples=40, deadline=None)
@given(arrays(float, (9, 2), elements=st.floats(-50, 50)), st.integers(0, 3), st.integers(0, 10**6))
def test_lloyd_properties(x, n_trim, seed):
    rng = np.random.default_rng(seed)
    centers = x[rng.choice(9, 3, replace=False)]
    res = lloyd(x, centers, n_trim=n_trim)
    assert res.trimmed.sum() == n_trim
    kept = ~res.trimmed
    assert np.all(np.bincount(res.labels[kept], minlength=3) > 0) or len(np.unique(x, axis=0)) < 3
    assert np.all(np.diff(res.trace) <= 1e-7 * (1 + abs(res.trace[0])))


def test_rsk_naive_demo_close_to_bayes_rule():
    # nearest true mean on the two signal features is the best any
    # clustering can do on this design
    X, truth = generate_dataset("naive_demo", 1)
    fit = rsk_means(X, 3, 1.4, 0.1, FitOptions(n_starts=20, seed=1))
    means = np.array([[-2.0, -2.0], [0.0, 0.0], [2.0, 2.0]])
    bayes = ((X.values[:, None, :2] - means) ** 2).sum(axis=-1).argmin(axis=1)
    assert cer(truth, fit.partition, fit.trimmed) <= cer(truth, bayes) + 0.02
