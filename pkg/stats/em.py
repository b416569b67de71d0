"""
Expectation-maximization for the latent-class likelihood prod_i p(X_i|w).

Used to get maximum log-likelihoods for penalized model-selection scores.
Responsibilities and parameter updates are floored at 1e-12 before
normalization so that every fit keeps a finite log-likelihood.
"""

import functools
import logging

import numpy as np

from stats.errors import ModelError
from stats.model_core import Dataset, NetworkSpec, ParamSet, check_dataset, check_params, observation_probs

logger = logging.getLogger(__name__)

FLOOR = 1e-12


def _normalize(array: np.ndarray) -> np.ndarray:
    array = np.maximum(array, FLOOR)
    return array / array.sum(axis=-1, keepdims=True)


def log_likelihood(spec: NetworkSpec, params: ParamSet, data: Dataset) -> float:
    """sum_i log p(X_i|w); -inf if some row has probability zero."""
    check_dataset(spec, data)
    with np.errstate(divide='ignore'):
        return float(np.sum(np.log(observation_probs(spec, params, data.rows))))


def random_params(spec: NetworkSpec, rng: np.random.Generator) -> ParamSet:
    """Parameters with every simplex vector drawn from a flat Dirichlet."""
    a = tuple(rng.dirichlet(np.ones(t)) for t in spec.T)
    b = tuple(rng.dirichlet(np.ones(y), size=spec.n_cells) for y in spec.Y)
    return ParamSet(a=a, b=b)


def _pattern_loglik(a, b, patterns, counts):
    """Joint cell-and-pattern weights (P, C) and the data log-likelihood."""
    weights = functools.reduce(np.multiply.outer, a).ravel()
    joint = np.tile(weights, (patterns.shape[0], 1))
    for j, table in enumerate(b):
        joint *= table[:, patterns[:, j] - 1].T
    return joint, float(counts @ np.log(joint.sum(axis=1)))


def em_run(spec: NetworkSpec, data: Dataset, init: ParamSet, tol: float, max_iter: int):
    """
    Run EM from one starting point.

    Args:
        spec: Learner shape
        data: Dataset with at least one row
        init: Starting parameters
        tol: Stop once an iteration improves the log-likelihood by less than this
        max_iter: Largest number of EM updates

    Returns:
        tuple: (fitted ParamSet, final log-likelihood, log-likelihood history)
    """
    check_params(spec, init)
    check_dataset(spec, data)
    if data.n < 1:
        raise ModelError("EM needs at least one sample")
    patterns, counts = data.patterns()
    a = [np.array(row) for row in init.a]
    b = [np.array(table) for table in init.b]

    joint, loglik = _pattern_loglik(a, b, patterns, counts)
    history = [loglik]
    for _ in range(max_iter):
        # E step: posterior over cells per pattern, weighted by multiplicity
        resp = _normalize(joint / joint.sum(axis=1, keepdims=True)) * counts[:, None]

        # M step: each hidden node takes its marginal of the expected cell counts
        cell_counts = resp.sum(axis=0).reshape(spec.T)
        a = [
            _normalize(cell_counts.sum(axis=tuple(ax for ax in range(spec.K) if ax != k)))
            for k in range(spec.K)
        ]
        b = []
        for j, y in enumerate(spec.Y):
            expected = np.zeros((spec.n_cells, y))
            for state in range(y):
                expected[:, state] = resp[patterns[:, j] == state + 1].sum(axis=0)
            b.append(_normalize(expected))

        joint, new_loglik = _pattern_loglik(a, b, patterns, counts)
        history.append(new_loglik)
        if new_loglik < loglik - 1e-9 * max(1.0, abs(loglik)):
            logger.warning("EM log-likelihood decreased from %.12g to %.12g", loglik, new_loglik)
        converged = new_loglik - loglik < tol
        loglik = new_loglik
        if converged:
            break
    return ParamSet(a=tuple(a), b=tuple(b)), loglik, history


def fit_em(spec: NetworkSpec, data: Dataset, restarts: int, tol: float, max_iter: int, seed):
    """
    Best of several EM runs from flat-Dirichlet random starts.

    Returns:
        tuple: (ParamSet with the highest log-likelihood, that log-likelihood)
    """
    if restarts < 1:
        raise ModelError(f"Need at least one EM restart, got {restarts}")
    rng = np.random.default_rng(seed)
    best_params, best_loglik = None, -np.inf
    for _ in range(restarts):
        params, loglik, _ = em_run(spec, data, random_params(spec, rng), tol, max_iter)
        if best_params is None or loglik > best_loglik:
            best_params, best_loglik = params, loglik
    logger.debug("EM best log-likelihood %.10g over %d restarts", best_loglik, restarts)
    return best_params, best_loglik
