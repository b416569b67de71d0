"""
Bayesian evidence for naive Bayesian networks under Dirichlet priors.

The exact route marginalizes the latent assignments: items are grouped by
observation pattern, every allocation of a pattern's items to joint hidden
cells is weighted by its multinomial coefficient, and the parameter integrals
are closed-form Dirichlet-multinomial terms. Allocations that lead to the same
sufficient statistics are merged as patterns are added, so the work grows with
the number of distinct statistics rather than with C^n. Everything is carried
in log space.

The Monte-Carlo route averages the likelihood over prior draws.
"""

import itertools
import logging
import math
from dataclasses import dataclass, replace
from typing import Literal

import numpy as np
from scipy.special import gammaln, logsumexp

from config.settings import EXACT_COST_LIMIT
from stats.divergence import categorical_kl
from stats.errors import InfeasibleError, ModelError, NumericalError
from stats.model_core import (
    Dataset,
    NetworkSpec,
    TrueModel,
    check_compatible,
    check_dataset,
    observation_probs,
    observation_space,
    probability_table,
    require_valid,
    sample_dataset,
)
from stats.replicates import spawn_seeds

logger = logging.getLogger(__name__)

Method = Literal['exact', 'mc']

# Rows materialized per expansion chunk of the exact computation
_CHUNK_ROWS = 2_000_000
# Prior draws per Monte-Carlo block
_MC_BLOCK = 10_000
# Keys above this use row-wise uniqueness instead of packed integer keys
_MAX_PACKED_KEY = 2**62


@dataclass(frozen=True, eq=False)
class Prior:
    """
    Independent Dirichlet priors for every simplex of a network.

    alpha_a[k] has length T[k]; alpha_b[j] has shape (C, Y[j]).
    """

    alpha_a: tuple
    alpha_b: tuple

    def __post_init__(self):
        alpha_a = tuple(np.asarray(row, dtype=float) for row in self.alpha_a)
        alpha_b = tuple(np.atleast_2d(np.asarray(table, dtype=float)) for table in self.alpha_b)
        for alpha in alpha_a + alpha_b:
            if not np.all(np.isfinite(alpha)) or np.any(alpha <= 0):
                raise ModelError("Dirichlet concentrations must be positive and finite")
            alpha.setflags(write=False)
        object.__setattr__(self, 'alpha_a', alpha_a)
        object.__setattr__(self, 'alpha_b', alpha_b)

    @classmethod
    def uniform(cls, spec: NetworkSpec, alpha: float = 1.0) -> 'Prior':
        """Every concentration equal to alpha."""
        return cls(
            alpha_a=tuple(np.full(t, alpha) for t in spec.T),
            alpha_b=tuple(np.full((spec.n_cells, y), alpha) for y in spec.Y),
        )

    @property
    def spec(self) -> NetworkSpec:
        return NetworkSpec(T=tuple(len(row) for row in self.alpha_a), Y=tuple(t.shape[1] for t in self.alpha_b))


@dataclass(frozen=True)
class EvidenceResult:
    """
    Log marginal likelihood of a dataset, optionally completed with the
    empirical entropy S and the stochastic complexity F = -log_Z0 - S.
    """

    log_Z0: float
    method: Method
    stderr: float
    terms: int
    S_emp: float | None = None
    F: float | None = None

    def as_line(self) -> str:
        def real(value):
            return float('nan') if value is None else value
        return (
            f"log_Z0={self.log_Z0} S={real(self.S_emp)} F={real(self.F)} "
            f"stderr={self.stderr} terms={self.terms}"
        )


@dataclass(frozen=True)
class Estimate:
    """Replicate mean with its standard error."""

    mean: float
    stderr: float
    values: tuple[float, ...]


def _check_prior(spec: NetworkSpec, prior: Prior) -> None:
    if prior.spec != spec:
        raise ModelError(f"Prior of shape {prior.spec} does not match network {spec}")
    if any(table.shape[0] != spec.n_cells for table in prior.alpha_b):
        raise ModelError(f"Prior tables must have {spec.n_cells} cells")


def log_dirmult(alpha: np.ndarray, counts: np.ndarray) -> np.ndarray:
    """log B(alpha + m) / B(alpha) along the last axis, broadcasting leading axes."""
    return (
        gammaln(alpha.sum(axis=-1))
        - gammaln(alpha.sum(axis=-1) + counts.sum(axis=-1))
        + np.sum(gammaln(alpha + counts) - gammaln(alpha), axis=-1)
    )


def allocation_count(spec: NetworkSpec, data: Dataset) -> int:
    """Number of pattern-to-cell allocations: prod_p binom(n_p + C - 1, C - 1)."""
    C = spec.n_cells
    _, counts = data.patterns()
    return math.prod(math.comb(int(n_p) + C - 1, C - 1) for n_p in counts)


def _compositions(total: int, parts: int) -> np.ndarray:
    """All vectors of `parts` nonnegative integers summing to `total`, shape (Q, parts)."""
    if parts == 1:
        return np.array([[total]], dtype=np.int64)
    bars = np.array(list(itertools.combinations(range(total + parts - 1), parts - 1)), dtype=np.int64)
    edges = np.hstack([
        np.full((bars.shape[0], 1), -1, dtype=np.int64),
        bars,
        np.full((bars.shape[0], 1), total + parts - 1, dtype=np.int64),
    ])
    return np.diff(edges, axis=1) - 1


def _merge(stats: np.ndarray, log_w: np.ndarray, radix: int) -> tuple[np.ndarray, np.ndarray]:
    """Combine rows with identical statistics, log-summing their weights."""
    D = stats.shape[1]
    if radix ** D < _MAX_PACKED_KEY:
        keys = stats @ (radix ** np.arange(D, dtype=np.int64))
        _, first, inverse = np.unique(keys, return_index=True, return_inverse=True)
        unique_stats = stats[first]
    else:
        unique_stats, inverse = np.unique(stats, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)

    order = np.argsort(inverse, kind='stable')
    starts = np.flatnonzero(np.r_[True, np.diff(inverse[order]) != 0])
    peak = np.maximum.reduceat(log_w[order], starts)
    total = np.bincount(inverse, weights=np.exp(log_w - peak[inverse]), minlength=len(unique_stats))
    return unique_stats, peak + np.log(total)


def _expand(stats, log_w, delta, log_mult, radix):
    """Add every allocation of the next pattern to every state, merging chunk by chunk."""
    step = max(1, _CHUNK_ROWS // delta.shape[0])
    parts_stats, parts_w = [], []
    for start in range(0, stats.shape[0], step):
        chunk = (stats[start:start + step, None, :] + delta[None, :, :]).reshape(-1, stats.shape[1])
        chunk_w = (log_w[start:start + step, None] + log_mult[None, :]).ravel()
        merged = _merge(chunk, chunk_w, radix)
        parts_stats.append(merged[0])
        parts_w.append(merged[1])
    if len(parts_stats) == 1:
        return parts_stats[0], parts_w[0]
    return _merge(np.vstack(parts_stats), np.concatenate(parts_w), radix)


def log_evidence_exact(spec: NetworkSpec, prior: Prior, data: Dataset, cost_limit: int | None = None) -> EvidenceResult:
    """
    Exact log marginal likelihood log Z0 by latent marginalization.

    Args:
        spec: Learner shape
        prior: Dirichlet prior for spec
        data: Observed dataset
        cost_limit: Largest allowed allocation count (default from settings)

    Returns:
        EvidenceResult: method 'exact', stderr 0, terms = allocation count

    Raises:
        InfeasibleError: the allocation count exceeds cost_limit
    """
    require_valid(spec, min_states=1)
    _check_prior(spec, prior)
    check_dataset(spec, data)
    limit = EXACT_COST_LIMIT if cost_limit is None else cost_limit
    terms = allocation_count(spec, data)
    if terms > limit:
        raise InfeasibleError(
            f"Exact evidence needs {terms} allocations (limit {limit}); use the Monte-Carlo method"
        )
    if data.n == 0:
        return EvidenceResult(log_Z0=0.0, method='exact', stderr=0.0, terms=terms)

    C, Y = spec.n_cells, spec.Y
    patterns, counts = data.patterns()
    offsets = np.concatenate([[0], np.cumsum([y - 1 for y in Y])])
    width = 1 + int(offsets[-1])
    D = (C - 1) * width
    radix = data.n + 1

    # Statistics of cells 1..C-1: item count, then counts of states 1..Y_j-1 per node.
    # The last cell and the last state of every node follow from the totals.
    stats = np.zeros((1, D), dtype=np.int64)
    log_w = np.zeros(1)
    for pattern, n_p in zip(patterns, counts):
        comps = _compositions(int(n_p), C)
        log_mult = gammaln(n_p + 1) - gammaln(comps + 1).sum(axis=1)
        contribution = np.zeros((C, D), dtype=np.int64)
        for c in range(C - 1):
            contribution[c, c * width] = 1
            for j, x in enumerate(pattern):
                if x < Y[j]:
                    contribution[c, c * width + 1 + offsets[j] + x - 1] = 1
        stats, log_w = _expand(stats, log_w, comps @ contribution, log_mult, radix)
    logger.debug("exact evidence: %d allocations merged into %d statistics", terms, len(log_w))

    log_terms = log_w + _log_parameter_integrals(spec, prior, patterns, counts, stats, width, offsets)
    return EvidenceResult(log_Z0=float(logsumexp(log_terms)), method='exact', stderr=0.0, terms=terms)


def _log_parameter_integrals(spec, prior, patterns, counts, stats, width, offsets) -> np.ndarray:
    """Dirichlet-multinomial integrals of every merged statistic."""
    C, Y = spec.n_cells, spec.Y
    n_states = stats.shape[0]
    blocks = stats.reshape(n_states, C - 1, width)

    cell_counts = np.empty((n_states, C), dtype=np.int64)
    cell_counts[:, :C - 1] = blocks[:, :, 0]
    cell_counts[:, C - 1] = counts.sum() - blocks[:, :, 0].sum(axis=1)

    # Mixing weights: Dirichlet per hidden node on that node's marginal counts
    total = np.zeros(n_states)
    shaped = cell_counts.reshape((n_states,) + tuple(spec.T))
    for k, alpha in enumerate(prior.alpha_a):
        other_axes = tuple(axis + 1 for axis in range(spec.K) if axis != k)
        total += log_dirmult(alpha, shaped.sum(axis=other_axes))

    # Conditional tables: Dirichlet per (cell, node) on state counts
    for j, alpha in enumerate(prior.alpha_b):
        y = Y[j]
        node_totals = np.bincount(patterns[:, j] - 1, weights=counts, minlength=y).astype(np.int64)
        state_counts = np.empty((n_states, C, y), dtype=np.int64)
        state_counts[:, :C - 1, :y - 1] = blocks[:, :, 1 + offsets[j]:1 + offsets[j + 1]]
        state_counts[:, :C - 1, y - 1] = cell_counts[:, :C - 1] - state_counts[:, :C - 1, :y - 1].sum(axis=2)
        state_counts[:, C - 1, :] = node_totals - state_counts[:, :C - 1, :].sum(axis=1)
        total += log_dirmult(alpha, state_counts).sum(axis=1)
    return total


def _mc_block_loglik(spec, prior, patterns, counts, size, seed) -> np.ndarray:
    """Log-likelihood of the data at `size` prior draws."""
    rng = np.random.default_rng(seed)
    weights = np.ones((size, 1))
    for alpha in prior.alpha_a:
        a = rng.dirichlet(alpha, size=size)
        weights = (weights[:, :, None] * a[:, None, :]).reshape(size, -1)

    likelihood = np.ones((size, spec.n_cells, patterns.shape[0]))
    for j, alpha in enumerate(prior.alpha_b):
        b = np.stack([rng.dirichlet(row, size=size) for row in alpha], axis=1)
        likelihood *= b[:, :, patterns[:, j] - 1]

    probs = np.einsum('sc,scp->sp', weights, likelihood)
    with np.errstate(divide='ignore'):
        return np.log(probs) @ counts


def log_evidence_mc(spec: NetworkSpec, prior: Prior, data: Dataset, draws: int, seed) -> EvidenceResult:
    """
    Monte-Carlo log marginal likelihood: log of the mean likelihood over prior draws.

    The standard error is the delta-method error of log Z0. Draws are made in
    fixed-size blocks, each seeded from (seed, block index).

    Raises:
        ModelError: fewer than 100 draws
        NumericalError: the data is impossible under every draw
    """
    require_valid(spec, min_states=1)
    _check_prior(spec, prior)
    check_dataset(spec, data)
    if draws < 100:
        raise ModelError(f"Monte-Carlo evidence needs at least 100 draws, got {draws}")
    if data.n == 0:
        return EvidenceResult(log_Z0=0.0, method='mc', stderr=0.0, terms=draws)

    patterns, counts = data.patterns()
    n_blocks = math.ceil(draws / _MC_BLOCK)
    sizes = [min(_MC_BLOCK, draws - b * _MC_BLOCK) for b in range(n_blocks)]
    loglik = np.concatenate([
        _mc_block_loglik(spec, prior, patterns, counts, size, block_seed)
        for size, block_seed in zip(sizes, spawn_seeds(seed, n_blocks))
    ])
    if not np.any(np.isfinite(loglik)):
        raise NumericalError("Every prior draw gives the data zero likelihood")

    peak = loglik.max()
    shifted = np.exp(loglik - peak)
    stderr = float(np.std(shifted, ddof=1) / (np.mean(shifted) * math.sqrt(draws)))
    log_Z0 = float(logsumexp(loglik) - math.log(draws))
    return EvidenceResult(log_Z0=log_Z0, method='mc', stderr=stderr, terms=draws)


def log_evidence(spec: NetworkSpec, prior: Prior, data: Dataset, method: Method = 'exact',
                 draws: int = 100_000, seed=0, cost_limit: int | None = None) -> EvidenceResult:
    """Dispatch to the exact or Monte-Carlo evidence."""
    if method == 'exact':
        return log_evidence_exact(spec, prior, data, cost_limit)
    if method == 'mc':
        return log_evidence_mc(spec, prior, data, draws, seed)
    raise ModelError(f"Unknown evidence method {method!r}")


def stochastic_complexity(evidence: EvidenceResult, truth: TrueModel, data: Dataset) -> EvidenceResult:
    """
    Complete an evidence result with S = -sum_i log q(X_i) and F = -log_Z0 - S.

    Raises:
        ModelError: some observation has zero probability under the truth
    """
    check_dataset(truth.true_spec, data)
    q = observation_probs(truth.true_spec, truth.true_params, data.rows)
    if np.any(q <= 0):
        raise ModelError("Dataset contains observations impossible under the declared truth")
    # 0.0 - x keeps an empty dataset at +0.0 rather than -0.0
    S_emp = 0.0 - float(np.sum(np.log(q)))
    return replace(evidence, S_emp=S_emp, F=0.0 - evidence.log_Z0 - S_emp)


def predictive_table(spec: NetworkSpec, prior: Prior, data: Dataset, cost_limit: int | None = None) -> np.ndarray:
    """Bayesian predictive p(x|data) for every x in observation-space order."""
    base = log_evidence_exact(spec, prior, data, cost_limit).log_Z0
    return np.array([
        math.exp(log_evidence_exact(spec, prior, data.extended(x), cost_limit).log_Z0 - base)
        for x in observation_space(spec)
    ])


def predictive(spec: NetworkSpec, prior: Prior, data: Dataset, x, cost_limit: int | None = None) -> float:
    """Bayesian predictive probability Z0(data + x) / Z0(data)."""
    base = log_evidence_exact(spec, prior, data, cost_limit).log_Z0
    return math.exp(log_evidence_exact(spec, prior, data.extended(x), cost_limit).log_Z0 - base)


def generalization_error(truth: TrueModel, spec: NetworkSpec, prior: Prior, data: Dataset,
                         cost_limit: int | None = None) -> float:
    """KL from the truth to the predictive distribution given one dataset."""
    q = probability_table(truth.true_spec, truth.true_params)
    return categorical_kl(q, predictive_table(spec, prior, data, cost_limit))


def gen_error_direct(truth: TrueModel, spec: NetworkSpec, prior: Prior, n: int, replicates: int, seed,
                     cost_limit: int | None = None) -> Estimate:
    """
    Generalization error G(n) averaged over replicate datasets.

    Replicate r uses child seed r of `seed`, the same datasets the learning
    curve uses at size n.
    """
    check_compatible(truth, spec)
    if replicates < 2:
        raise ModelError(f"Need at least 2 replicates, got {replicates}")
    values = [
        generalization_error(truth, spec, prior, sample_dataset(truth, n, child), cost_limit)
        for child in spawn_seeds(seed, replicates)
    ]
    return summarize(values)


def summarize(values) -> Estimate:
    """Mean and standard error of replicate values."""
    values = np.asarray(values, dtype=float)
    stderr = float(np.std(values, ddof=1) / math.sqrt(len(values))) if len(values) > 1 else 0.0
    return Estimate(mean=float(np.mean(values)), stderr=stderr, values=tuple(float(v) for v in values))
