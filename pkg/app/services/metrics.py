"""
Error metrics shared by training, model selection and the experiment harness.
"""
import numpy as np

from app.models.errors import DegenerateTargetError, DimensionError


def nmse(predictions, observations) -> float:
    """
    Normalised mean-squared error in percent: 100 / (N sigma_y^2) * sum (yhat - y)^2.

    sigma_y is the population standard deviation (divide by N) of the
    observations, so predicting their mean scores exactly 100. For several
    output columns the per-column values are averaged.
    """
    y = np.asarray(observations, dtype=float)
    y_hat = np.asarray(predictions, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    if y_hat.ndim == 1:
        y_hat = y_hat[:, None]
    if y.shape != y_hat.shape:
        raise DimensionError(f"predictions {y_hat.shape} vs observations {y.shape}")
    if y.shape[0] < 2:
        raise DimensionError("NMSE needs at least two observations")
    variance = y.var(axis=0)
    if np.any(variance == 0):
        raise DegenerateTargetError("observations have zero variance")
    per_dim = 100.0 * np.mean((y_hat - y) ** 2, axis=0) / variance
    return float(per_dim.mean())
