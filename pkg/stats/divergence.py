"""
Kullback informations between the true distribution and a learner.

All sums run over the finite observation space. Terms with q(x) = 0 contribute
nothing; q(x) > 0 with p(x|w) = 0 makes the divergence infinite, returned as
math.inf.
"""

import logging
import math

import numpy as np
from scipy.special import rel_entr

from stats.errors import ModelError, NumericalError
from stats.model_core import (
    Dataset,
    NetworkSpec,
    ParamSet,
    TrueModel,
    check_compatible,
    check_dataset,
    check_params,
    embed_truth,
    observation_probs,
    probability_table,
)

logger = logging.getLogger(__name__)

# Values in [-KL_TOL, 0) are rounding noise and are clamped to zero
KL_TOL = 1e-12
# Attempts before sample_near_truth gives up
MAX_REJECTIONS = 1000


def _clamp(value: float) -> float:
    if -KL_TOL <= value < 0:
        return 0.0
    return float(value)


def categorical_kl(q: np.ndarray, p: np.ndarray) -> float:
    """KL(q || p) of two probability vectors in nats."""
    return _clamp(float(np.sum(rel_entr(q, p))))


def kl_tables(q: np.ndarray, p: np.ndarray) -> np.ndarray:
    """
    KL(q || p_i) for a batch of tables.

    Args:
        q: True table, shape (X,)
        p: Learner tables, shape (..., X)

    Returns:
        np.ndarray: One divergence per leading index of p, inf where support is lost
    """
    values = np.sum(rel_entr(q, p), axis=-1)
    return np.where((values < 0) & (values >= -KL_TOL), 0.0, values)


def kl_full(truth: TrueModel, spec: NetworkSpec, params: ParamSet) -> float:
    """
    Kullback information H(w) = sum_x q(x) log(q(x) / p(x|w)).

    Args:
        truth: True model
        spec: Learner shape
        params: Learner parameters

    Returns:
        float: Divergence in nats, math.inf if the learner misses part of the true support
    """
    check_compatible(truth, spec)
    check_params(spec, params)
    q = probability_table(truth.true_spec, truth.true_params)
    p = probability_table(spec, params)
    return _clamp(float(np.sum(rel_entr(q, p))))


def empirical_kl(truth: TrueModel, spec: NetworkSpec, params: ParamSet, data: Dataset) -> float:
    """
    Empirical Kullback information (1/n) sum_i log(q(X_i) / p(X_i|w)).

    May be negative for finite samples. Returns math.inf if some observed row
    has p(X_i|w) = 0.
    """
    check_compatible(truth, spec)
    check_dataset(spec, data)
    if data.n < 1:
        raise ModelError("Empirical Kullback information needs at least one sample")
    q = observation_probs(truth.true_spec, truth.true_params, data.rows)
    p = observation_probs(spec, params, data.rows)
    if np.any(q <= 0):
        raise ModelError("Dataset contains observations impossible under the truth")
    if np.any(p <= 0):
        return math.inf
    return float(np.mean(np.log(q) - np.log(p)))


def cell_kl(truth: TrueModel, true_cell, params: ParamSet, learner_cell) -> float:
    """
    Divergence between the observable tables of one true cell and one learner cell.

    The product kernel factorizes, so this is the sum over observable nodes of
    categorical divergences.

    Args:
        truth: True model
        true_cell: 1-based cell tuple over the true state counts S
        params: Learner parameters
        learner_cell: 1-based cell tuple over the learner state counts T

    Returns:
        float: Divergence in nats, math.inf on a support mismatch
    """
    if params.spec.Y != truth.true_spec.Y:
        raise ModelError(f"Learner observables {params.spec.Y} differ from truth {truth.true_spec.Y}")
    tc = truth.true_spec.cell_index(true_cell)
    lc = params.spec.cell_index(learner_cell)
    total = sum(
        float(np.sum(rel_entr(true_table[tc], table[lc])))
        for true_table, table in zip(truth.true_params.b, params.b)
    )
    return _clamp(total)


def _perturb(center: np.ndarray, free: np.ndarray, eps: float, rng: np.random.Generator) -> np.ndarray:
    """Box-perturb one simplex vector and renormalize; free coordinates draw from [0, eps]."""
    shift = rng.uniform(-eps, eps, size=center.shape)
    shifted = np.where(free, rng.uniform(0.0, eps, size=center.shape), center + shift)
    shifted = np.clip(shifted, 0.0, None)
    total = shifted.sum()
    if total <= 0:
        return center.copy()
    return shifted / total


def _within(vector: np.ndarray, center: np.ndarray, radius: float) -> bool:
    return bool(np.all(np.abs(vector - center) <= radius))


def sample_near_truth(truth: TrueModel, spec: NetworkSpec, eps: float, seed) -> ParamSet:
    """
    Draw a parameter from the box neighbourhood W(eps) of the embedded truth.

    Truth-aligned coordinates move uniformly within +-eps, extra mixing weights
    are drawn from [0, eps], tables of the remaining cells move within +-eps of
    the first true cell's table. Each vector is then renormalized onto its
    simplex; draws that leave W(2 eps) are rejected.

    Raises:
        ModelError: eps is not positive or the shapes are incompatible
        NumericalError: no acceptable draw after MAX_REJECTIONS attempts
    """
    if not eps > 0:
        raise ModelError(f"Radius eps must be positive, got {eps}")
    center = embed_truth(truth, spec)
    rng = np.random.default_rng(seed)

    # Mixing-weight states beyond the truth carry weight 0 at the center
    extra = []
    for k, t in enumerate(spec.T):
        mask = np.zeros(t, dtype=bool)
        mask[(truth.S[k] if k < truth.H else 1):] = True
        extra.append(mask)

    for attempt in range(MAX_REJECTIONS):
        a = [_perturb(row, mask, eps, rng) for row, mask in zip(center.a, extra)]
        b = [
            np.array([_perturb(row, np.zeros(row.shape, dtype=bool), eps, rng) for row in table])
            for table in center.b
        ]
        inside = all(_within(row, c_row, 2 * eps) for row, c_row in zip(a, center.a)) and all(
            _within(table, c_table, 2 * eps) for table, c_table in zip(b, center.b)
        )
        if inside:
            if attempt:
                logger.debug("sample_near_truth accepted after %d rejections", attempt)
            return ParamSet(a=tuple(a), b=tuple(b))
    raise NumericalError(f"No draw stayed inside W(2*eps) for eps={eps} after {MAX_REJECTIONS} attempts")
