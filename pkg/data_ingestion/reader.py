"""
Readers for model, truth, parameter, dataset and experiment files.

Model files are line-oriented `key = value` text. Blank lines and text after
`#` are ignored. Learner keys: `K`, `T`, `M`, `Y`. Truth files carry `M`, `Y`,
`H`, `S` and the tables `a.k = p1,p2,...` (hidden node k) and
`b.c.j = p1,p2,...` (1-based cell c in lexicographic order with the last
hidden index fastest, observable j). A truth file may also hold learner keys
and experiment keys; each reader only looks at the keys it needs.
Datasets are CSV files with header `x1,...,xM`.
"""

import logging
from pathlib import Path

import numpy as np
import pandas as pd

from stats.errors import ModelError
from stats.model_core import Dataset, NetworkSpec, ParamSet, TrueModel, check_dataset, require_valid

logger = logging.getLogger(__name__)

EXPERIMENT_KEYS = {
    'ns': 'int_list',
    'replicates': 'int',
    'method': 'str',
    'mc_draws': 'int',
    'prior_alpha': 'float',
    'seed': 'int',
    'em_restarts': 'int',
}


def read_key_values(path) -> dict[str, str]:
    """Parse a `key = value` file into a dict, rejecting malformed and duplicate keys."""
    values = {}
    text = Path(path).read_text()
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ModelError(f"{path}:{number}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split('=', 1))
        if key in values:
            raise ModelError(f"{path}:{number}: duplicate key {key!r}")
        values[key] = value
    return values


def _ints(values: dict, key: str) -> tuple[int, ...]:
    if key not in values:
        raise ModelError(f"Missing key {key!r}")
    try:
        return tuple(int(v) for v in values[key].split(','))
    except ValueError as e:
        raise ModelError(f"Key {key!r} must hold comma-separated integers, got {values[key]!r}") from e


def _int(values: dict, key: str) -> int:
    parsed = _ints(values, key)
    if len(parsed) != 1:
        raise ModelError(f"Key {key!r} must hold one integer, got {values[key]!r}")
    return parsed[0]


def _floats(values: dict, key: str) -> np.ndarray:
    if key not in values:
        raise ModelError(f"Missing key {key!r}")
    try:
        return np.array([float(v) for v in values[key].split(',')])
    except ValueError as e:
        raise ModelError(f"Key {key!r} must hold comma-separated numbers, got {values[key]!r}") from e


def _shape(values: dict, count_key: str, states_key: str) -> tuple[int, ...]:
    count, states = _int(values, count_key), _ints(values, states_key)
    if len(states) != count:
        raise ModelError(f"{states_key} lists {len(states)} state counts but {count_key} = {count}")
    return states


def parse_spec(values: dict) -> NetworkSpec:
    """Learner shape from parsed keys K, T, M, Y."""
    return NetworkSpec(T=_shape(values, 'K', 'T'), Y=_shape(values, 'M', 'Y'))


def parse_tables(values: dict, spec: NetworkSpec) -> ParamSet:
    """The a.k and b.c.j tables for a network of shape spec."""
    expected = {f"a.{k}" for k in range(1, spec.K + 1)}
    expected |= {f"b.{c}.{j}" for c in range(1, spec.n_cells + 1) for j in range(1, spec.M + 1)}
    unknown = sorted(key for key in values if key.startswith(('a.', 'b.')) and key not in expected)
    if unknown:
        raise ModelError(f"Table keys {unknown} do not fit a network with T={spec.T}, Y={spec.Y}")
    a = tuple(_floats(values, f"a.{k}") for k in range(1, spec.K + 1))
    b = tuple(
        np.array([_floats(values, f"b.{c}.{j}") for c in range(1, spec.n_cells + 1)])
        for j in range(1, spec.M + 1)
    )
    for k, (row, t) in enumerate(zip(a, spec.T), start=1):
        if row.shape[0] != t:
            raise ModelError(f"a.{k} has {row.shape[0]} entries, expected {t}")
    for j, (table, y) in enumerate(zip(b, spec.Y), start=1):
        if table.shape[1] != y:
            raise ModelError(f"b.*.{j} rows have {table.shape[1]} entries, expected {y}")
    return ParamSet(a=a, b=b)


def read_spec(path) -> NetworkSpec:
    """Read and validate a learner shape."""
    spec = parse_spec(read_key_values(path))
    require_valid(spec)
    return spec


def read_truth(path) -> TrueModel:
    """Read a true model (H, S, M, Y and its tables)."""
    values = read_key_values(path)
    true_spec = NetworkSpec(T=_shape(values, 'H', 'S'), Y=_shape(values, 'M', 'Y'))
    require_valid(true_spec, min_states=1)
    return TrueModel(true_spec=true_spec, true_params=parse_tables(values, true_spec))


def read_params(path) -> tuple[NetworkSpec, ParamSet]:
    """Read a learner shape together with an explicit parameter point."""
    values = read_key_values(path)
    spec = parse_spec(values)
    require_valid(spec)
    return spec, parse_tables(values, spec)


def read_dataset(path, spec: NetworkSpec | None = None) -> Dataset:
    """
    Read a dataset CSV.

    Args:
        path: CSV file with header x1,...,xM
        spec: Optional shape the rows are checked against
    """
    frame = pd.read_csv(path)
    columns = [f"x{j}" for j in range(1, frame.shape[1] + 1)]
    if list(frame.columns) != columns:
        raise ModelError(f"Dataset header must be {','.join(columns)}, got {','.join(map(str, frame.columns))}")
    if frame.empty:
        # header-only file: pandas reads the columns as object dtype
        data = Dataset.empty(len(columns))
    elif not all(pd.api.types.is_integer_dtype(dtype) for dtype in frame.dtypes):
        raise ModelError("Dataset entries must be integers")
    else:
        data = Dataset(frame.to_numpy(dtype=np.int64))
    if spec is not None:
        check_dataset(spec, data)
    return data


def read_experiment(path) -> dict:
    """Experiment keys (ns, replicates, method, mc_draws, prior_alpha, seed, em_restarts) present in a file."""
    values = read_key_values(path)
    config = {}
    for key, kind in EXPERIMENT_KEYS.items():
        if key not in values:
            continue
        try:
            if kind == 'int_list':
                config[key] = [int(v) for v in values[key].split(',')]
            elif kind == 'int':
                config[key] = int(values[key])
            elif kind == 'float':
                config[key] = float(values[key])
            else:
                config[key] = values[key]
        except ValueError as e:
            raise ModelError(f"Experiment key {key!r} has invalid value {values[key]!r}") from e
    logger.debug("experiment config from %s: %s", path, config)
    return config
