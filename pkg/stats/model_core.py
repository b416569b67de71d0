"""
Naive Bayesian networks with latent nodes.

K mutually independent hidden nodes (T[k] states each) feed M observable nodes
(Y[j] states each). A joint hidden cell is one assignment (i_1, ..., i_K); cells
are enumerated lexicographically with i_K varying fastest, and that order is
shared by the in-memory tables and the model files. Observation states are
1-based.

Parameters are stored as full probability vectors, first component included;
`dimension()` still reports the count of free coordinates.
"""

import functools
import itertools
import math
from dataclasses import dataclass
from numbers import Integral

import numpy as np

from stats.errors import ModelError

# Tolerance for a stored probability vector to sum to one
PROB_TOL = 1e-12
# Tolerance for a probability table to sum to one over the observation space
NORM_TOL = 1e-10
# Largest joint-cell or observation-space size handled
MAX_TABLE_SIZE = 2**31 - 1


@dataclass(frozen=True)
class NetworkSpec:
    """Shape of a network: hidden state counts T and observable state counts Y."""

    T: tuple[int, ...]
    Y: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, 'T', tuple(self.T))
        object.__setattr__(self, 'Y', tuple(self.Y))

    @property
    def K(self) -> int:
        return len(self.T)

    @property
    def M(self) -> int:
        return len(self.Y)

    @property
    def n_cells(self) -> int:
        """Joint hidden-cell count C = prod(T)."""
        return math.prod(self.T)

    @property
    def n_observations(self) -> int:
        """Observation-space size X = prod(Y)."""
        return math.prod(self.Y)

    def cells(self) -> list[tuple[int, ...]]:
        """All joint hidden cells as 1-based tuples, i_K varying fastest."""
        return list(itertools.product(*(range(1, t + 1) for t in self.T)))

    def cell_index(self, cell) -> int:
        """0-based position of a 1-based cell tuple in `cells()` order."""
        if len(cell) != self.K:
            raise ModelError(f"Cell {tuple(cell)} does not have {self.K} indices")
        for i, t in zip(cell, self.T):
            if not 1 <= i <= t:
                raise ModelError(f"Cell {tuple(cell)} is outside state counts {self.T}")
        return int(np.ravel_multi_index(tuple(i - 1 for i in cell), self.T))


@dataclass(frozen=True, eq=False)
class ParamSet:
    """
    Mixing weights and conditional tables of a network.

    a[k] is the probability vector of hidden node k (length T[k]).
    b[j] has shape (C, Y[j]); row c is the distribution of observable j in cell c.
    """

    a: tuple
    b: tuple

    def __post_init__(self):
        a = tuple(_frozen(np.asarray(row, dtype=float)) for row in self.a)
        b = tuple(_frozen(np.atleast_2d(np.asarray(table, dtype=float))) for table in self.b)
        object.__setattr__(self, 'a', a)
        object.__setattr__(self, 'b', b)

    @property
    def spec(self) -> NetworkSpec:
        """The shape these parameters are laid out for."""
        return NetworkSpec(T=tuple(len(row) for row in self.a), Y=tuple(t.shape[1] for t in self.b))


@dataclass(frozen=True, eq=False)
class TrueModel:
    """The true distribution: a network with H hidden nodes of S[k] states."""

    true_spec: NetworkSpec
    true_params: ParamSet

    def __post_init__(self):
        require_valid(self.true_spec, min_states=1)
        check_params(self.true_spec, self.true_params)

    @property
    def H(self) -> int:
        return self.true_spec.K

    @property
    def S(self) -> tuple[int, ...]:
        return self.true_spec.T


@dataclass(frozen=True, eq=False)
class Dataset:
    """n observation vectors, one per row, entries 1-based."""

    rows: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64)
        if rows.ndim != 2:
            raise ModelError(f"Dataset rows must be a 2-D array, got shape {rows.shape}")
        object.__setattr__(self, 'rows', _frozen(rows))

    @classmethod
    def empty(cls, M: int) -> 'Dataset':
        return cls(np.empty((0, M), dtype=np.int64))

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def M(self) -> int:
        return self.rows.shape[1]

    def patterns(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct observation vectors (sorted) and their multiplicities."""
        if self.n == 0:
            return self.rows.copy(), np.empty(0, dtype=np.int64)
        patterns, counts = np.unique(self.rows, axis=0, return_counts=True)
        return patterns, counts

    def extended(self, x) -> 'Dataset':
        """A new dataset with observation x appended."""
        return Dataset(np.vstack([self.rows, np.asarray(x, dtype=np.int64).reshape(1, self.M)]))


def _frozen(array: np.ndarray) -> np.ndarray:
    array = array.copy()
    array.setflags(write=False)
    return array


def validate_spec(spec: NetworkSpec, min_states: int = 2) -> list[str]:
    """
    Check a network shape.

    Args:
        spec: Shape to check
        min_states: Smallest allowed hidden state count (2 for learners, 1 for truths)

    Returns:
        list[str]: Violated constraints; empty when the shape is valid
    """
    problems = []
    if spec.K < 1:
        problems.append("K must be at least 1")
    if spec.M < 1:
        problems.append("M must be at least 1")
    for k, t in enumerate(spec.T, start=1):
        if not isinstance(t, Integral):
            problems.append(f"T[{k}] = {t!r} is not an integer")
        elif t < min_states:
            problems.append(f"T[{k}] = {t} < {min_states}")
    for j, y in enumerate(spec.Y, start=1):
        if not isinstance(y, Integral):
            problems.append(f"Y[{j}] = {y!r} is not an integer")
        elif y < 2:
            problems.append(f"Y[{j}] = {y} < 2")
    if not problems:
        if spec.n_cells > MAX_TABLE_SIZE:
            problems.append(f"cell count C = {spec.n_cells} exceeds {MAX_TABLE_SIZE}")
        if spec.n_observations > MAX_TABLE_SIZE:
            problems.append(f"observation-space size X = {spec.n_observations} exceeds {MAX_TABLE_SIZE}")
    return problems


def require_valid(spec: NetworkSpec, min_states: int = 2) -> None:
    """Raise ModelError listing every violated shape constraint."""
    problems = validate_spec(spec, min_states)
    if problems:
        raise ModelError("Invalid network shape: " + "; ".join(problems))


def check_params(spec: NetworkSpec, params: ParamSet) -> None:
    """Raise ModelError unless params are laid out for spec and every vector is a distribution."""
    if params.spec != spec:
        raise ModelError(f"Parameters of shape {params.spec} do not match network {spec}")
    for k, row in enumerate(params.a, start=1):
        _check_simplex(row, f"a[{k}]")
    for j, table in enumerate(params.b, start=1):
        if table.shape[0] != spec.n_cells:
            raise ModelError(f"b for node {j} has {table.shape[0]} cells, expected {spec.n_cells}")
        for c, row in enumerate(table, start=1):
            _check_simplex(row, f"b[{c}][{j}]")


def _check_simplex(vector: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(vector)) or np.any(vector < 0):
        raise ModelError(f"{name} has negative or non-finite entries: {vector}")
    if abs(vector.sum() - 1.0) > PROB_TOL:
        raise ModelError(f"{name} sums to {vector.sum():.17g}, not 1")


def check_dataset(spec: NetworkSpec, data: Dataset) -> None:
    """Raise ModelError if any row has the wrong length or a state out of range."""
    if data.M != spec.M:
        raise ModelError(f"Dataset has {data.M} columns, network has {spec.M} observable nodes")
    if data.n and (np.any(data.rows < 1) or np.any(data.rows > np.asarray(spec.Y))):
        raise ModelError(f"Dataset has states outside the ranges {spec.Y}")


def check_compatible(truth: TrueModel, spec: NetworkSpec) -> None:
    """Raise ModelError unless the learner can realize the truth (H <= K, S[k] <= T[k])."""
    require_valid(spec)
    if truth.true_spec.Y != spec.Y:
        raise ModelError(f"Truth observables {truth.true_spec.Y} differ from learner observables {spec.Y}")
    if truth.H > spec.K:
        raise ModelError(f"Truth has {truth.H} hidden nodes, learner only {spec.K}")
    for k, (s, t) in enumerate(zip(truth.S, spec.T), start=1):
        if s > t:
            raise ModelError(f"Truth hidden node {k} has {s} states, learner only {t}")


def is_compatible(truth: TrueModel, spec: NetworkSpec) -> bool:
    try:
        check_compatible(truth, spec)
    except ModelError:
        return False
    return True


def cell_weights(params: ParamSet) -> np.ndarray:
    """Mixing weight prod_k a[k][c_k] of every joint cell, in cell order."""
    return functools.reduce(np.multiply.outer, params.a).ravel()


def observation_space(spec: NetworkSpec) -> np.ndarray:
    """All X observation vectors (1-based) in lexicographic order, last node fastest."""
    return np.array(list(itertools.product(*(range(1, y + 1) for y in spec.Y))), dtype=np.int64)


def observation_probs(spec: NetworkSpec, params: ParamSet, rows: np.ndarray) -> np.ndarray:
    """
    p(x|w) for every row of an (n, M) array of 1-based observation vectors.
    """
    rows = np.asarray(rows, dtype=np.int64)
    likelihood = np.ones((rows.shape[0], spec.n_cells))
    for j, table in enumerate(params.b):
        likelihood *= table[:, rows[:, j] - 1].T
    return likelihood @ cell_weights(params)


def probability_table(spec: NetworkSpec, params: ParamSet) -> np.ndarray:
    """p(x|w) over the whole observation space, in `observation_space` order."""
    return observation_probs(spec, params, observation_space(spec))


def _check_observation(spec: NetworkSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64).reshape(-1)
    if x.shape[0] != spec.M:
        raise ModelError(f"Observation {x.tolist()} has {x.shape[0]} entries, expected {spec.M}")
    if np.any(x < 1) or np.any(x > np.asarray(spec.Y)):
        raise ModelError(f"Observation {x.tolist()} is outside state ranges {spec.Y}")
    return x


def joint_prob(spec: NetworkSpec, params: ParamSet, x) -> float:
    """
    Probability of one observation vector under the network.

    Args:
        spec: Network shape
        params: Parameters laid out for spec
        x: Observation vector of length M, 1-based states

    Returns:
        float: sum over cells of prod_k a[k][c_k] * prod_j b[c][j][x_j]
    """
    if params.spec != spec:
        raise ModelError(f"Parameters of shape {params.spec} do not match network {spec}")
    x = _check_observation(spec, x)
    return float(observation_probs(spec, params, x[None, :])[0])


def dimension(spec: NetworkSpec) -> int:
    """Free-parameter count: sum_k (T[k]-1) + prod_k T[k] * sum_j (Y[j]-1)."""
    return sum(t - 1 for t in spec.T) + spec.n_cells * sum(y - 1 for y in spec.Y)


def true_density(truth: TrueModel, x) -> float:
    """q(x) of the true distribution."""
    return joint_prob(truth.true_spec, truth.true_params, x)


def aligned_cells(truth: TrueModel, spec: NetworkSpec) -> tuple[np.ndarray, np.ndarray]:
    """
    Match learner cells to true cells.

    A learner cell is truth-aligned when i_m <= S_m for m <= H and i_m = 1 for
    m > H. Aligned cells map to the true cell (i_1..i_H); all other cells map
    to the first true cell (1..1).

    Returns:
        tuple: boolean mask of aligned learner cells, and the 0-based true cell per learner cell
    """
    H = truth.H
    aligned = np.zeros(spec.n_cells, dtype=bool)
    true_index = np.zeros(spec.n_cells, dtype=np.int64)
    for c, cell in enumerate(spec.cells()):
        head, tail = cell[:H], cell[H:]
        if all(i <= s for i, s in zip(head, truth.S)) and all(i == 1 for i in tail):
            aligned[c] = True
            true_index[c] = truth.true_spec.cell_index(head)
    return aligned, true_index


def embed_truth(truth: TrueModel, spec: NetworkSpec) -> ParamSet:
    """
    Express the true parameter in the learner's parameter space.

    Extra states of true hidden nodes get weight 0, hidden nodes beyond H put all
    weight on state 1, and cells that are not truth-aligned copy the table of
    the first true cell.
    """
    check_compatible(truth, spec)
    a = []
    for k, t in enumerate(spec.T):
        row = np.zeros(t)
        if k < truth.H:
            row[:truth.S[k]] = truth.true_params.a[k]
        else:
            row[0] = 1.0
        a.append(row)
    _, true_index = aligned_cells(truth, spec)
    b = tuple(table[true_index] for table in truth.true_params.b)
    return ParamSet(a=tuple(a), b=b)


def _inverse_cdf(cdf: np.ndarray, u: np.ndarray) -> np.ndarray:
    """0-based categorical draws from uniforms; cdf is (Y,) or one (n, Y) row per draw."""
    thresholds = cdf[..., :-1]
    if thresholds.ndim == 1:
        thresholds = thresholds[None, :]
    return (u[:, None] >= thresholds).sum(axis=1)


def sample_dataset(truth: TrueModel, n: int, seed) -> Dataset:
    """
    Draw n i.i.d. observations from the true distribution.

    Each row consumes H + M uniforms in row-major order, so the first n rows of
    a sample of size n + 1 equal the sample of size n for the same seed.

    Args:
        truth: True model
        n: Sample count
        seed: Integer seed or numpy SeedSequence

    Returns:
        Dataset: n rows of 1-based observation vectors
    """
    if n < 0:
        raise ModelError(f"Sample count must be nonnegative, got {n}")
    spec, params = truth.true_spec, truth.true_params
    rng = np.random.default_rng(seed)
    u = rng.random((n, truth.H + spec.M))

    hidden = [_inverse_cdf(np.cumsum(row), u[:, k]) for k, row in enumerate(params.a)]
    cells = np.ravel_multi_index(tuple(hidden), spec.T) if n else np.empty(0, dtype=np.int64)

    rows = np.empty((n, spec.M), dtype=np.int64)
    for j, table in enumerate(params.b):
        cdf = np.cumsum(table, axis=1)[cells]
        rows[:, j] = 1 + _inverse_cdf(cdf, u[:, truth.H + j])
    return Dataset(rows)
