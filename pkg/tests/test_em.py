import numpy as np
import pytest

from conftest import bernoulli_truth
from stats.em import em_run, fit_em, log_likelihood, random_params
from stats.errors import ModelError
from stats.model_core import Dataset, NetworkSpec, ParamSet, TrueModel, embed_truth, sample_dataset


def test_single_cell_start_recovers_frequencies():
    spec = NetworkSpec(T=(2,), Y=(3,))
    data = Dataset(np.array([[1], [1], [2], [3], [3], [3]]))
    init = ParamSet(a=([1.0, 0.0],), b=(np.full((2, 3), 1 / 3),))
    params, loglik, _ = em_run(spec, data, init, tol=1e-12, max_iter=50)
    frequencies = np.array([2, 1, 3]) / 6
    np.testing.assert_allclose(params.b[0][0], frequencies, atol=1e-6)
    assert loglik == pytest.approx(float(np.array([2, 1, 3]) @ np.log(frequencies)), abs=1e-6)


def test_log_likelihood_never_decreases():
    truth = TrueModel(
        true_spec=NetworkSpec(T=(2,), Y=(2, 2, 2)),
        true_params=ParamSet(a=([0.3, 0.7],), b=(np.array([[0.9, 0.1], [0.2, 0.8]]),) * 3),
    )
    data = sample_dataset(truth, 300, seed=4)
    spec = NetworkSpec(T=(3,), Y=(2, 2, 2))
    init = random_params(spec, np.random.default_rng(0))
    _, _, history = em_run(spec, data, init, tol=0.0, max_iter=200)
    steps = np.diff(history)
    assert np.all(steps >= -1e-9 * np.abs(history[1:]))


def test_best_fit_dominates_the_truth():
    truth = bernoulli_truth(0.3, 0.6)
    spec = NetworkSpec(T=(2,), Y=(2, 2))
    data = sample_dataset(truth, 200, seed=6)
    _, best = fit_em(spec, data, restarts=20, tol=1e-10, max_iter=1000, seed=1)
    assert best >= log_likelihood(spec, embed_truth(truth, spec), data) - 1e-6


def test_fit_is_deterministic():
    truth = bernoulli_truth(0.3, 0.6)
    spec = NetworkSpec(T=(2,), Y=(2, 2))
    data = sample_dataset(truth, 50, seed=2)
    assert fit_em(spec, data, 3, 1e-8, 200, seed=5)[1] == fit_em(spec, data, 3, 1e-8, 200, seed=5)[1]


def test_rejects_empty_data_and_zero_restarts():
    spec = NetworkSpec(T=(2,), Y=(2,))
    init = ParamSet(a=([0.5, 0.5],), b=(np.full((2, 2), 0.5),))
    with pytest.raises(ModelError):
        em_run(spec, Dataset.empty(1), init, 1e-8, 10)
    with pytest.raises(ModelError):
        fit_em(spec, Dataset(np.array([[1]])), 0, 1e-8, 10, seed=0)
