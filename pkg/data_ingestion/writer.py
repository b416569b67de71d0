"""
Writers for datasets and experiment result tables.

Output is plain CSV with one header row and '\\n' line endings, so identical
inputs give byte-identical files.
"""

import logging
from pathlib import Path

import pandas as pd

from stats.model_core import Dataset

logger = logging.getLogger(__name__)


def write_table(rows: list[dict], columns: list[str], path) -> None:
    """
    Write records to a CSV file with exactly the given columns.

    Args:
        rows: One dict per record
        columns: Column order; extra keys in rows are dropped
        path: Output file
    """
    path = Path(path)
    if path.parent != Path('.'):
        path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(rows, columns=columns)
    frame.to_csv(path, index=False, lineterminator='\n')
    logger.info("wrote %d rows to %s", len(frame), path)


def write_dataset(data: Dataset, path) -> None:
    """Write a dataset with header x1,...,xM."""
    columns = [f"x{j}" for j in range(1, data.M + 1)]
    write_table([dict(zip(columns, map(int, row))) for row in data.rows], columns, path)
