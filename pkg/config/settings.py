"""
Settings loader.

Reads the `.env` file from the repository root and exposes typed constants used
as defaults by the command-line tools. Experiment config files and CLI flags
override these values.
"""

import os
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()


def _get_env(key: str, default: str, cast=str):
    """Read an environment variable and convert it, raising a clear error on bad values."""
    value = os.getenv(key, default)
    try:
        return cast(value)
    except (TypeError, ValueError) as e:
        raise ValueError(f"Environment variable '{key}' has invalid value {value!r}") from e


def _int_list(value: str) -> list[int]:
    return [int(v) for v in value.split(',') if v.strip()]


def _flag(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ('1', 'true', 'yes', 'on'):
        return True
    if lowered in ('0', 'false', 'no', 'off', ''):
        return False
    raise ValueError(value)


# Experiment defaults
DEFAULT_SEED = _get_env('BNSC_SEED', '0', int)
DEFAULT_PRIOR_ALPHA = _get_env('BNSC_PRIOR_ALPHA', '1.0', float)
DEFAULT_NS = _get_env('BNSC_NS', '8,16,32,64,128', _int_list)
DEFAULT_REPLICATES = _get_env('BNSC_REPLICATES', '100', int)
DEFAULT_METHOD = _get_env('BNSC_METHOD', 'exact')
DEFAULT_MC_DRAWS = _get_env('BNSC_MC_DRAWS', '100000', int)

# Exact evidence refuses datasets whose allocation count exceeds this bound
EXACT_COST_LIMIT = _get_env('BNSC_EXACT_COST_LIMIT', '100000000', int)

# EM fitter used by model selection
EM_RESTARTS = _get_env('BNSC_EM_RESTARTS', '20', int)
EM_TOL = _get_env('BNSC_EM_TOL', '1e-8', float)
EM_MAX_ITER = _get_env('BNSC_EM_MAX_ITER', '500', int)

# Runtime
WORKERS = _get_env('BNSC_WORKERS', '1', int)
LOG_LEVEL = _get_env('BNSC_LOG_LEVEL', 'INFO').upper()

# MLflow tracking (off unless enabled)
MLFLOW_TRACKING_ENABLED = _get_env('MLFLOW_TRACKING_ENABLED', 'false', _flag)
