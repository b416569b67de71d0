"""
The functional  F(S, psi) = -log integral exp(-n S(w)) psi(w) dw  on a box.

Evaluated with a tensor-product midpoint rule in log space; boxes of up to
three dimensions.
"""

import numpy as np
from scipy.special import logsumexp

from stats.errors import ModelError, NumericalError

MAX_DIM = 3


def grid_points(box, grid: int) -> tuple[np.ndarray, float]:
    """
    Midpoints of a regular grid on a box.

    Args:
        box: Sequence of (low, high) bounds, one per axis
        grid: Points per axis

    Returns:
        tuple: (points array of shape (grid**dim, dim), log volume of one grid cell)
    """
    box = np.asarray(box, dtype=float).reshape(-1, 2)
    if not 1 <= box.shape[0] <= MAX_DIM:
        raise ModelError(f"Box dimension must be between 1 and {MAX_DIM}, got {box.shape[0]}")
    if grid < 1 or np.any(box[:, 1] <= box[:, 0]):
        raise ModelError("Quadrature needs at least one point per axis and nonempty bounds")
    widths = (box[:, 1] - box[:, 0]) / grid
    axes = [low + (np.arange(grid) + 0.5) * h for (low, _), h in zip(box, widths)]
    mesh = np.meshgrid(*axes, indexing='ij')
    points = np.stack([m.ravel() for m in mesh], axis=1)
    return points, float(np.sum(np.log(widths)))


def laplace_functional(S_fn, psi, box, n: float, grid: int) -> float:
    """
    Evaluate -log integral exp(-n S(w)) psi(w) dw by midpoint quadrature.

    Args:
        S_fn: Vectorized function mapping (N, dim) points to nonnegative values
        psi: Vectorized nonnegative weight function on the same points
        box: Sequence of (low, high) bounds
        n: Scale
        grid: Points per axis

    Raises:
        NumericalError: the integrand vanishes on every grid point
    """
    points, log_cell = grid_points(box, grid)
    values = np.asarray(S_fn(points), dtype=float).reshape(-1)
    weights = np.asarray(psi(points), dtype=float).reshape(-1)
    if np.any(weights < 0):
        raise ModelError("Weight function must be nonnegative")
    if np.any(values < 0):
        raise ModelError("S must be nonnegative on the box")
    with np.errstate(divide='ignore', invalid='ignore'):
        log_terms = -n * values + np.log(weights)
    log_terms = np.where(np.isnan(log_terms), -np.inf, log_terms)
    if not np.any(np.isfinite(log_terms)):
        raise NumericalError("Integrand is zero on every quadrature point")
    return float(-(logsumexp(log_terms) + log_cell))
