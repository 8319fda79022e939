import itertools

import numpy as np
import pytest

from specdetect.cluster import assemble, count_groups, kmeans, select_k
from specdetect.exceptions import DataError
from specdetect.model.types import ClusterModel, FrequencyGrid, PeakCandidate, PeakFit, TimeGrid
from specdetect.peakfit import separable_model, theta_from_params

GT = TimeGrid(delta_t=0.2, n=60)
GF = FrequencyGrid(f_min=400.0, delta_f=2.0, m=200)


def _fit(o, d, center, mag=10.0):
    cand = PeakCandidate(t_index=GT.index_of(o + 1.0), f_index=GF.index_of(center), intensity=1.0, prominence=1.0)
    return PeakFit(candidate=cand, a_hat=1.0, gamma_hat=6.0, c_hat=center, nu_hat=0.5, o_hat=o, d_hat=d,
                   alpha_hat=1.0, beta_hat=1.0, mag_hat=mag, rss=0.0, converged=True, sigma2_hat=16.0)


def _brute_force_inertia(x, k):
    best = np.inf
    for labels in itertools.product(range(k), repeat=x.shape[0]):
        labels = np.array(labels)
        if np.unique(labels).size < k:
            continue
        inertia = sum(np.sum((x[labels == j] - x[labels == j].mean(axis=0)) ** 2) for j in range(k))
        best = min(best, inertia)
    return best


def test_kmeans_matches_brute_force_optimum():
    rng = np.random.default_rng(77)
    for instance in range(50):
        n = int(rng.integers(3, 9))
        k = int(rng.integers(1, 4))
        x = rng.uniform(0.0, 10.0, size=(n, 2))
        model = kmeans(x, k, seed=instance, restarts=20)
        assert model.inertia == pytest.approx(_brute_force_inertia(x, k), rel=1e-9, abs=1e-12)
        assert sorted(np.unique(model.assignments)) == list(range(k))


def test_kmeans_is_deterministic_and_checks_k():
    x = np.random.default_rng(3).normal(size=(12, 2))
    a = kmeans(x, 3, seed=5)
    b = kmeans(x, 3, seed=5)
    np.testing.assert_array_equal(a.assignments, b.assignments)
    assert a.inertia == b.inertia
    assert list(a.trace) == sorted(a.trace, reverse=True)
    with pytest.raises(DataError):
        kmeans(x, 0, seed=0)
    with pytest.raises(DataError):
        kmeans(x, 13, seed=0)


def test_kmeans_is_invariant_to_point_order():
    rng = np.random.default_rng(21)
    centres = np.array([[1.0, 1.0], [6.0, 1.5], [11.0, 1.0]])
    x = np.vstack([c + rng.normal(0.0, 0.1, size=(6, 2)) for c in centres])
    perm = rng.permutation(x.shape[0])
    a = kmeans(x, 3, seed=2)
    b = kmeans(x[perm], 3, seed=2)
    assert b.inertia == pytest.approx(a.inertia, rel=1e-12)
    back = np.empty_like(b.assignments)
    back[perm] = b.assignments
    same_a = a.assignments[:, None] == a.assignments[None, :]
    same_b = back[:, None] == back[None, :]
    np.testing.assert_array_equal(same_a, same_b)
    np.testing.assert_allclose(b.centroids[np.argsort(b.centroids[:, 0])], a.centroids[np.argsort(a.centroids[:, 0])],
                               rtol=1e-12)


def test_select_k_finds_separated_groups():
    rng = np.random.default_rng(11)
    centres = np.array([[1.0, 1.0], [5.0, 1.0], [9.0, 2.0], [13.0, 1.0]])
    x = np.vstack([c + rng.normal(0.0, 0.05, size=(5, 2)) for c in centres])
    assert select_k(x, k_max=10, seed=0) == 4


def test_select_k_degenerate_inputs():
    assert select_k(np.zeros((0, 2)), k_max=5, seed=0) == 0
    assert select_k([[1.0, 2.0]], k_max=5, seed=0) == 1
    assert select_k(np.ones((6, 2)), k_max=5, seed=0) == 1
    assert select_k([[0.0, 0.0], [10.0, 0.0]], k_max=5, seed=0) == 2
    # Pairs closer than the separation merge into one analyte.
    assert select_k([[1.0, 1.0], [1.05, 1.0], [1.1, 1.0]], k_max=5, seed=0, min_separation=0.2) == 1


def test_count_groups():
    x = [[0.0, 0.0], [0.1, 0.0], [5.0, 5.0]]
    assert count_groups(x, 0.5) == 2
    assert count_groups(x, 0.0) == 3
    assert count_groups([[0.0, 0.0], [0.0, 0.0]], 0.0) == 1
    assert count_groups(np.zeros((0, 2)), 1.0) == 0


def test_assemble_orders_clusters_by_origin_and_reproduces_surfaces():
    fits = [_fit(6.0, 1.0, 600.0), _fit(1.0, 1.0, 500.0, mag=20.0), _fit(6.0, 1.0, 700.0)]
    model = ClusterModel(k_hat=2, centroids=np.array([[1.0, 1.0], [6.0, 1.0]]),
                         assignments=np.array([1, 0, 1]), inertia=0.0)
    result = assemble(fits, model, GF, GT)
    assert result.k_hat == 2
    assert [a.centroid for a in result.analytes] == [(1.0, 1.0), (6.0, 1.0)]
    assert [len(a.member_peaks) for a in result.analytes] == [1, 2]

    early = result.analytes[0]
    theta = theta_from_params(20.0, 16.0, 500.0, 0.5, 1.0, 1.0, 1.0, 1.0)
    np.testing.assert_allclose(np.outer(early.elution_hat, early.spectrum_hat),
                               separable_model(theta, GT.axis, GF.axis), atol=1e-10)

    late = result.analytes[1]
    expected = sum(separable_model(theta_from_params(10.0, 16.0, c, 0.5, 6.0, 1.0, 1.0, 1.0), GT.axis, GF.axis)
                   for c in (600.0, 700.0))
    np.testing.assert_allclose(np.outer(late.elution_hat, late.spectrum_hat), expected, atol=1e-10)


def test_assemble_checks_assignments():
    model = ClusterModel(k_hat=1, centroids=np.zeros((1, 2)), assignments=np.array([0]), inertia=0.0)
    with pytest.raises(DataError):
        assemble([_fit(1.0, 1.0, 500.0), _fit(2.0, 1.0, 600.0)], model, GF, GT)
    assert assemble([], model, GF, GT).k_hat == 0
