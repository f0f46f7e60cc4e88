import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from anonymixer.cluster import ClusterAssignment
from anonymixer.config import DEFAULT_EPS_GRID
from anonymixer.dataio import generate_toy_telemetry
from anonymixer.errors import NoValidParamsError, ParameterError, UndefinedMetricError
from anonymixer.metrics import (
    ValidationScores,
    calinski_harabasz,
    davies_bouldin,
    score_all,
    select_dbscan_params,
    select_kmeans_k,
    silhouette,
)


def _random_case(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(6, 201))
    m = int(rng.integers(1, 6))
    k = int(rng.integers(2, min(6, n // 2) + 1))
    x = rng.normal(size=(n, m)) * rng.uniform(0.5, 3.0)
    labels = np.concatenate([np.arange(k), rng.integers(0, k, size=n - k)])
    rng.shuffle(labels)
    if seed % 3 == 0:
        # sprinkle noise rows, keeping every cluster populated
        noise = rng.random(n) < 0.1
        keep_one = [np.flatnonzero(labels == c)[0] for c in range(k)]
        noise[keep_one] = False
        labels = np.where(noise, -1, labels)
    return x, labels


def _rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


def test_four_point_example(four_points):
    x, lab = four_points
    s = score_all(x, lab)
    expected_sil = 1.0 - 2.0 / (10.0 + math.sqrt(101.0))
    assert s.silhouette == pytest.approx(expected_sil, rel=1e-12)
    assert round(s.silhouette, 4) == 0.9002
    assert s.calinski_harabasz == pytest.approx(200.0, rel=1e-12)
    assert s.davies_bouldin == pytest.approx(0.1, rel=1e-12)
    assert s.n_effective_rows == 4


@pytest.mark.parametrize("seed", range(100))
def test_matches_bruteforce_oracle(seed):
    x, lab = _random_case(seed)
    assert _rel(silhouette(x, lab), oracles.silhouette(x, lab)) <= 1e-9 or abs(oracles.silhouette(x, lab)) < 1e-12
    assert _rel(calinski_harabasz(x, lab), oracles.calinski_harabasz(x, lab)) <= 1e-9
    assert _rel(davies_bouldin(x, lab), oracles.davies_bouldin(x, lab)) <= 1e-9


def test_all_singletons_score_zero():
    x = np.arange(10.0).reshape(5, 2)
    assert silhouette(x, np.arange(5)) == 0.0
    assert davies_bouldin(x, np.arange(5)) == 0.0


def test_interleaved_duplicates_nonpositive(rng):
    base = rng.normal(size=(30, 3))
    x = np.vstack([base, base])
    lab = np.r_[np.zeros(30, int), np.ones(30, int)]
    assert silhouette(x, lab) <= 0.0


def test_one_cluster_is_undefined():
    x = np.random.default_rng(0).normal(size=(10, 2))
    with pytest.raises(UndefinedMetricError):
        score_all(x, np.zeros(10, int))


def test_ch_k_equals_n_is_undefined():
    x = np.random.default_rng(0).normal(size=(4, 2))
    with pytest.raises(UndefinedMetricError):
        calinski_harabasz(x, np.arange(4))


def test_collapsed_clusters_give_infinite_ch():
    x = np.array([[0.0, 0.0]] * 3 + [[5.0, 5.0]] * 3)
    assert calinski_harabasz(x, [0, 0, 0, 1, 1, 1]) == math.inf


def test_coincident_centroids_give_infinite_db():
    x = np.array([[-1.0], [1.0], [-2.0], [2.0]])
    assert davies_bouldin(x, [0, 0, 1, 1]) == math.inf


def test_noise_rows_are_excluded(four_points):
    x, lab = four_points
    x2 = np.vstack([x, [[100.0, 100.0], [-50.0, 3.0]]])
    lab2 = ClusterAssignment(np.r_[lab, [-1, -1]], 2, True)
    a, b = score_all(x, lab), score_all(x2, lab2)
    assert a.as_tuple() == b.as_tuple()
    assert b.n_effective_rows == 4


def test_structured_beats_random_labels_ch(rng):
    raw, truth = generate_toy_telemetry(3, 200, 2, 4, 8.0)
    random_labels = rng.permutation(truth)
    assert calinski_harabasz(raw.values, truth) > calinski_harabasz(raw.values, random_labels)


@pytest.mark.parametrize("seed", range(5))
def test_relabeling_and_row_order_invariance(seed):
    x, lab = _random_case(seed + 1)
    k = lab.max() + 1
    perm_names = np.random.default_rng(seed).permutation(k)
    relabeled = np.where(lab >= 0, perm_names[np.maximum(lab, 0)], -1)
    assert score_all(x, lab).as_tuple() == score_all(x, relabeled).as_tuple()
    order = np.random.default_rng(seed + 50).permutation(len(lab))
    for a, b in zip(score_all(x, lab).as_tuple(), score_all(x[order], lab[order]).as_tuple()):
        assert a == pytest.approx(b, rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_rotation_and_scale_invariance(seed):
    x, lab = _random_case(seed + 10)
    q, _ = np.linalg.qr(np.random.default_rng(seed).normal(size=(x.shape[1], x.shape[1])))
    base = score_all(x, lab)
    rot = score_all(x @ q, lab)
    assert rot.calinski_harabasz == pytest.approx(base.calinski_harabasz, rel=1e-9)
    assert rot.davies_bouldin == pytest.approx(base.davies_bouldin, rel=1e-9)
    assert davies_bouldin(2.0 * x, lab) == pytest.approx(base.davies_bouldin, rel=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_silhouette_bounded(seed):
    x, lab = _random_case(seed)
    s = silhouette(x, lab)
    assert -1.0 <= s <= 1.0
    assert calinski_harabasz(x, lab) >= 0.0
    assert davies_bouldin(x, lab) >= 0.0


def test_scores_round_trip_through_dict():
    s = ValidationScores(0.5, math.inf, 0.25, 10)
    d = s.to_dict()
    assert d["calinski_harabasz"] == "inf"
    assert ValidationScores.from_dict(d) == s


def test_kmeans_sweep_finds_two_blobs(toy15):
    data, _ = toy15
    best, sweep = select_kmeans_k(data, 2, 10, seed=0)
    assert best == 2
    assert [kk for kk, _ in sweep] == list(range(2, 11))


def test_kmeans_sweep_finds_three_blobs():
    # equilateral centroids so no pair of blobs looks like one cluster from afar
    rng = np.random.default_rng(4)
    cents = np.array([[0.0, 0.0], [10.0, 0.0], [5.0, 5.0 * math.sqrt(3.0)]])
    x = np.vstack([c + rng.normal(size=(100, 2)) for c in cents])
    best, _ = select_kmeans_k(x, 2, 10, seed=0)
    assert best == 3


def test_kmeans_sweep_rejects_bad_range():
    x = np.random.default_rng(0).normal(size=(5, 2))
    with pytest.raises(ParameterError):
        select_kmeans_k(x, 3, 2)
    with pytest.raises(ParameterError):
        select_kmeans_k(x, 2, 5)


def test_dbscan_grid_selects_separating_eps():
    raw, truth = generate_toy_telemetry(2, 200, 2, 2, 10.0)
    params, best = select_dbscan_params(raw.values, [0.05, 1.5, 30.0], [5])
    assert params.eps == 1.5
    assert best > 0.5


def test_dbscan_grid_all_noise_raises():
    x = np.random.default_rng(0).normal(size=(30, 2)) * 100
    with pytest.raises(NoValidParamsError):
        select_dbscan_params(x, [1e-6], [3])


def test_dbscan_noise_cap(toy15):
    data, _ = toy15
    from anonymixer.cluster import dbscan_fit

    uncapped, _ = select_dbscan_params(data, DEFAULT_EPS_GRID, (3, 5, 10))
    capped, _ = select_dbscan_params(data, DEFAULT_EPS_GRID, (3, 5, 10), max_noise_fraction=0.05)
    assert dbscan_fit(data, capped).noise_count <= 0.05 * data.n_rows
    assert dbscan_fit(data, uncapped).noise_count > dbscan_fit(data, capped).noise_count
