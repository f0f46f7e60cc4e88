import math

import numpy as np
import pytest

import oracles
from anonymixer.ghmm import (
    VAR_FLOOR,
    GhmmModel,
    emission_logpdf,
    ghmm_decode,
    ghmm_fit,
    ghmm_loglik,
    path_logprob,
    viterbi_path,
)
from anonymixer.errors import ParameterError, ShapeError


def _random_model(rng, s, m):
    return GhmmModel(
        s,
        rng.dirichlet(np.ones(s)),
        rng.dirichlet(np.ones(s), size=s),
        rng.normal(size=(s, m)) * 2.0,
        rng.uniform(0.3, 2.0, size=(s, m)),
    )


def _check_model(model):
    assert abs(model.initial_probs.sum() - 1.0) <= 1e-9
    np.testing.assert_allclose(model.transition.sum(axis=1), 1.0, atol=1e-9)
    assert np.all(model.diag_vars >= VAR_FLOOR)


@pytest.mark.parametrize("seed", range(20))
def test_baum_welch_monotone(seed):
    rng = np.random.default_rng(seed)
    n, m = int(rng.integers(40, 200)), int(rng.integers(1, 5))
    x = rng.normal(size=(n, m)) + rng.integers(0, 3, size=(n, 1)) * 3.0
    s = int(rng.integers(2, 5))
    model, fit_log = ghmm_fit(x, n_states=s, seed=seed, max_iter=60, tol=0.0)
    assert np.all(np.diff(fit_log) >= -1e-8)
    _check_model(model)
    assert ghmm_loglik(model, x) == pytest.approx(fit_log[-1], rel=1e-12)


def test_single_state_is_gaussian_mle():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(150, 4)) * [1.0, 2.0, 0.5, 3.0] + [0.0, 1.0, -2.0, 5.0]
    model, fit_log = ghmm_fit(x, n_states=1, seed=0)
    mu, var = x.mean(axis=0), x.var(axis=0)
    closed = float(sum(oracles.gaussian_logpdf_diag(r, mu, var) for r in x))
    assert abs(fit_log[-1] - closed) <= 1e-9 * abs(closed)
    assert abs(ghmm_loglik(model, x) - closed) <= 1e-9 * abs(closed)
    assert ghmm_decode(model, x).labels.tolist() == [0] * 150


def test_alternating_sequence_learns_switching():
    rng = np.random.default_rng(1)
    centres = np.array([[0.0, 0.0], [20.0, 20.0]])
    x = centres[np.arange(200) % 2] + rng.normal(size=(200, 2))
    model, _ = ghmm_fit(x, n_states=2, seed=0)
    off = model.transition[[0, 1], [1, 0]]
    assert np.all(off > 0.9)


@pytest.mark.parametrize("seed", range(10))
def test_forward_matches_log_space_oracle(seed):
    rng = np.random.default_rng(seed)
    s, m = int(rng.integers(1, 5)), int(rng.integers(1, 4))
    model = _random_model(rng, s, m)
    x = rng.normal(size=(int(rng.integers(1, 60)), m)) * 2.0
    ref = oracles.forward_loglik(model, x)
    assert ghmm_loglik(model, x) == pytest.approx(ref, rel=1e-9)


def test_identical_states_give_mixture_density():
    rng = np.random.default_rng(2)
    mean, var = rng.normal(size=3), rng.uniform(0.5, 1.5, size=3)
    s = 3
    model = GhmmModel(s, np.full(s, 1 / s), np.full((s, s), 1 / s), np.tile(mean, (s, 1)), np.tile(var, (s, 1)))
    x = rng.normal(size=(40, 3))
    direct = sum(oracles.gaussian_logpdf_diag(r, mean, var) for r in x)
    assert ghmm_loglik(model, x) == pytest.approx(direct, rel=1e-9)
    assert ghmm_loglik(model, x[::-1]) == pytest.approx(direct, rel=1e-9)


@pytest.mark.parametrize("seed", range(5))
def test_state_permutation_symmetry(seed):
    rng = np.random.default_rng(seed)
    model = _random_model(rng, 4, 2)
    x = rng.normal(size=(50, 2))
    perm = rng.permutation(4)
    assert ghmm_loglik(model.permuted(perm), x) == pytest.approx(ghmm_loglik(model, x), rel=1e-9)


@pytest.mark.parametrize("s,n", [(2, 8), (2, 16), (3, 6), (3, 10), (3, 12), (4, 7), (5, 6), (10, 6)])
def test_viterbi_equals_exhaustive(s, n):
    assert s ** n <= 10 ** 6
    for seed in range(3):
        rng = np.random.default_rng(1000 * s + n + seed)
        model = _random_model(rng, s, 2)
        x = rng.normal(size=(n, 2)) * 2.0
        path = viterbi_path(model, x)
        best, _ = oracles.best_path_enumerated(model, x)
        assert path_logprob(model, x, path) == pytest.approx(best, rel=1e-12, abs=1e-12)


def test_viterbi_loop_oracle_small():
    rng = np.random.default_rng(9)
    model = _random_model(rng, 3, 2)
    x = rng.normal(size=(6, 2))
    best, best_path = oracles.best_path_exhaustive(model, x)
    assert tuple(viterbi_path(model, x).tolist()) == best_path


def test_viterbi_beats_random_paths():
    rng = np.random.default_rng(4)
    model = _random_model(rng, 3, 3)
    x = rng.normal(size=(20, 3)) * 2
    best = path_logprob(model, x, viterbi_path(model, x))
    for _ in range(1000):
        assert path_logprob(model, x, rng.integers(0, 3, size=20)) <= best


def test_uniform_transitions_decode_to_nearest_state():
    rng = np.random.default_rng(8)
    means = np.array([[0.0, 0.0], [10.0, 10.0]])
    model = GhmmModel(2, np.array([0.5, 0.5]), np.full((2, 2), 0.5), means, np.ones((2, 2)))
    x = means[rng.integers(0, 2, size=60)] + rng.normal(size=(60, 2))
    expected = emission_logpdf(model, x).argmax(axis=1)
    assert viterbi_path(model, x).tolist() == expected.tolist()
    a = ghmm_decode(model, x)
    assert a.labels.tolist() == ghmm_decode(model, x).labels.tolist()
    assert not a.noise_allowed


def test_errors():
    model = _random_model(np.random.default_rng(0), 2, 3)
    with pytest.raises(ShapeError):
        ghmm_loglik(model, np.zeros((4, 2)))
    with pytest.raises(ShapeError):
        ghmm_decode(model, np.zeros((4, 2)))
    with pytest.raises(ParameterError):
        ghmm_fit(np.zeros((2, 2)), n_states=3)


def test_json_round_trip():
    model = _random_model(np.random.default_rng(1), 3, 2)
    back = GhmmModel.from_dict(model.to_dict())
    x = np.random.default_rng(2).normal(size=(10, 2))
    assert ghmm_loglik(back, x) == ghmm_loglik(model, x)
    assert math.isfinite(ghmm_loglik(back, x))
