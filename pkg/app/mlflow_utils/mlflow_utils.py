"""
MLflow tracking for experiment runs.

Tracking is switched on with MLFLOW_TRACKING_ENABLED; the tracking URI and
experiment name come from MLFLOW_TRACKING_URI and MLFLOW_EXPERIMENT_NAME.
Every call here is best-effort: a tracking failure is logged and the
experiment carries on with identical results.
"""

import logging
import os
from contextlib import contextmanager

import mlflow

from config import settings

logger = logging.getLogger(__name__)


def init_mlflow() -> None:
    """
    Point MLflow at the configured tracking server and experiment.

    Raises:
        ValueError: a required variable is missing
    """
    tracking_uri = os.getenv('MLFLOW_TRACKING_URI')
    experiment_name = os.getenv('MLFLOW_EXPERIMENT_NAME')
    if not tracking_uri:
        raise ValueError("MLFLOW_TRACKING_URI not found in environment variables")
    if not experiment_name:
        raise ValueError("MLFLOW_EXPERIMENT_NAME not found in environment variables")
    mlflow.set_tracking_uri(tracking_uri)
    mlflow.set_experiment(experiment_name)


def start_new_run(run_name: str | None = None) -> None:
    """Close any active run and start a fresh one."""
    end_run()
    mlflow.start_run(run_name=run_name)


def end_run() -> None:
    if mlflow.active_run() is not None:
        mlflow.end_run()


def _active() -> bool:
    return settings.MLFLOW_TRACKING_ENABLED and mlflow.active_run() is not None


def log_params(params: dict) -> None:
    """Log run parameters; lists are stored as comma-separated strings."""
    if not _active():
        return
    flat = {key: ','.join(map(str, value)) if isinstance(value, (list, tuple)) else value
            for key, value in params.items()}
    try:
        mlflow.log_params(flat)
    except Exception as e:
        logger.warning("MLflow parameter logging failed: %s", e)


def log_metrics(metrics: dict, step: int | None = None) -> None:
    """Log summary metrics, skipping values that are None."""
    if not _active():
        return
    try:
        mlflow.log_metrics({key: float(value) for key, value in metrics.items() if value is not None}, step=step)
    except Exception as e:
        logger.warning("MLflow metric logging failed: %s", e)


def log_artifact(file_path) -> None:
    if not _active() or file_path is None:
        return
    try:
        mlflow.log_artifact(str(file_path))
    except Exception as e:
        logger.warning("MLflow artifact logging failed: %s", e)


@contextmanager
def tracked_run(run_name: str):
    """
    Wrap an experiment in an MLflow run when tracking is enabled.

    Yields True when a run is active. Initialization failures only disable
    tracking for this experiment.
    """
    if not settings.MLFLOW_TRACKING_ENABLED:
        yield False
        return
    try:
        init_mlflow()
        start_new_run(run_name)
    except Exception as e:
        logger.warning("MLflow initialization failed: %s", e)
        yield False
        return
    try:
        yield True
    finally:
        try:
            end_run()
        except Exception as e:
            logger.warning("MLflow run could not be closed: %s", e)
