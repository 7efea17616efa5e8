"""
Gaussian Process Service - zero-mean squared-exponential GP fitted per structure
Single Responsibility: the data-only baseline for the testing population
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg, optimize

from app.interfaces import IFewShotRegressor
from app.models import EpochRecord, TaskDataset
from app.models.errors import CholeskyError, DimensionError
from app.models.settings import GpSettings

logger = logging.getLogger(__name__)

LOG2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class GpModel:
    """Fitted GP: log(sigma_f, length_scale, sigma_n), data, and the Cholesky factor."""
    log_params: np.ndarray
    inputs: np.ndarray
    targets: np.ndarray
    chol: np.ndarray
    alpha: np.ndarray
    jitter: float
    log_likelihood: float

    @property
    def signal_variance(self) -> float:
        return float(np.exp(2.0 * self.log_params[0]))

    @property
    def length_scale(self) -> float:
        return float(np.exp(self.log_params[1]))

    @property
    def noise_variance(self) -> float:
        return float(np.exp(2.0 * self.log_params[2]))


def sq_exp_kernel(x1, x2, signal_variance: float, length_scale: float) -> np.ndarray:
    d = np.asarray(x1, dtype=float)[:, None] - np.asarray(x2, dtype=float)[None, :]
    return signal_variance * np.exp(-0.5 * (d / length_scale) ** 2)


def _factor(x, y, log_params, jitter):
    sf2 = np.exp(2.0 * log_params[0])
    ell = np.exp(log_params[1])
    sn2 = np.exp(2.0 * log_params[2])
    k_signal = sq_exp_kernel(x, x, sf2, ell)
    k = k_signal + (sn2 + jitter) * np.eye(x.size)
    try:
        chol = linalg.cholesky(k, lower=True)
    except linalg.LinAlgError as exc:
        raise CholeskyError(jitter) from exc
    alpha = linalg.cho_solve((chol, True), y)
    return k_signal, chol, alpha, sn2


def log_marginal_likelihood(log_params, x, y, jitter: float = 1e-9) -> Tuple[float, np.ndarray]:
    """log p(y | x, theta) and its analytic gradient w.r.t. log(sigma_f, length_scale, sigma_n)."""
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    log_params = np.asarray(log_params, dtype=float)
    k_signal, chol, alpha, sn2 = _factor(x, y, log_params, jitter)
    n = x.size
    value = -0.5 * y @ alpha - np.log(np.diag(chol)).sum() - 0.5 * n * LOG2PI

    k_inv = linalg.cho_solve((chol, True), np.eye(n))
    inner = np.outer(alpha, alpha) - k_inv
    sq_dist = (x[:, None] - x[None, :]) ** 2
    derivatives = (
        2.0 * k_signal,
        k_signal * sq_dist / np.exp(2.0 * log_params[1]),
        2.0 * sn2 * np.eye(n),
    )
    gradient = np.array([0.5 * np.sum(inner * dk) for dk in derivatives])
    return float(value), gradient


def _bounds(settings: GpSettings):
    noise = (np.log(settings.noise_floor), np.log(10.0))
    if settings.fixed_noise is not None:
        pinned = np.log(max(settings.fixed_noise, settings.noise_floor))
        noise = (pinned, pinned)
    return [(np.log(1e-3), np.log(1e3)), (np.log(1e-2), np.log(1e3)), noise]


def _starts(x, y, settings: GpSettings, init: Optional[Sequence[float]], rng) -> List[np.ndarray]:
    bounds = _bounds(settings)
    spread = float(np.std(y)) or 1.0
    span = float(np.ptp(x)) or 1.0
    first = np.log(init) if init is not None else np.log([spread, span, 0.1 * spread])
    starts = [np.clip(first, [b[0] for b in bounds], [b[1] for b in bounds])]
    for _ in range(settings.n_restarts - 1):
        starts.append(np.array([rng.uniform(lo, hi) for lo, hi in bounds]))
    return starts


def gp_condition(inputs, targets, log_params, jitter: float = 1e-9) -> GpModel:
    """GP with fixed hyperparameters conditioned on (inputs, targets)."""
    x = np.asarray(inputs, dtype=float).reshape(-1)
    y = np.asarray(targets, dtype=float).reshape(-1)
    log_params = np.asarray(log_params, dtype=float)
    _, chol, alpha, _ = _factor(x, y, log_params, jitter)
    value = -0.5 * y @ alpha - np.log(np.diag(chol)).sum() - 0.5 * x.size * LOG2PI
    return GpModel(log_params=log_params, inputs=x, targets=y, chol=chol, alpha=alpha,
                   jitter=jitter, log_likelihood=float(value))


def gp_fit(inputs, targets, settings: GpSettings = None, init: Optional[Sequence[float]] = None) -> GpModel:
    """
    Maximise the log marginal likelihood from several starts (L-BFGS-B, analytic
    gradients); if every start fails to factorise, escalate the jitter tenfold.
    """
    settings = settings or GpSettings()
    x = np.asarray(inputs, dtype=float).reshape(-1)
    y = np.asarray(targets, dtype=float)
    if y.ndim != 1:
        if y.ndim == 2 and y.shape[1] == 1:
            y = y[:, 0]
        else:
            raise DimensionError("gp_fit takes 1-D targets; use gp_fit_multi for several outputs")
    if x.size < 1 or x.size != y.size:
        raise DimensionError(f"{x.size} inputs and {y.size} targets")

    bounds = _bounds(settings)
    jitter = settings.jitter
    while jitter <= settings.max_jitter * (1 + 1e-12):
        rng = np.random.default_rng(settings.seed)
        best = None
        for start in _starts(x, y, settings, init, rng):
            def objective(p):
                value, gradient = log_marginal_likelihood(p, x, y, jitter)
                return -value, -gradient
            try:
                result = optimize.minimize(objective, start, jac=True, method='L-BFGS-B',
                                           bounds=bounds, options={'maxiter': settings.max_iter})
            except CholeskyError:
                continue
            if np.isfinite(result.fun) and (best is None or result.fun < best.fun):
                best = result
        if best is not None:
            return gp_condition(x, y, best.x, jitter)
        logger.warning("GP: every restart failed at jitter %g, escalating", jitter)
        jitter *= 10.0
    raise CholeskyError(settings.max_jitter)


def gp_predict(model: GpModel, queries) -> Tuple[np.ndarray, np.ndarray]:
    """Posterior mean and latent variance at the queries."""
    q = np.asarray(queries, dtype=float).reshape(-1)
    k_star = sq_exp_kernel(q, model.inputs, model.signal_variance, model.length_scale)
    mean = k_star @ model.alpha
    v = linalg.solve_triangular(model.chol, k_star.T, lower=True)
    variance = np.clip(model.signal_variance - np.sum(v * v, axis=0), 0.0, None)
    return mean, variance


def gp_fit_multi(inputs, targets, settings: GpSettings = None) -> List[GpModel]:
    """Independent GP per output column, each with the same settings and seed."""
    y = np.asarray(targets, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    return [gp_fit(inputs, y[:, j], settings) for j in range(y.shape[1])]


def gp_predict_multi(models: List[GpModel], queries) -> Tuple[np.ndarray, np.ndarray]:
    results = [gp_predict(m, queries) for m in models]
    return (np.column_stack([r[0] for r in results]),
            np.column_stack([r[1] for r in results]))


class GpRegressor(IFewShotRegressor):
    """
    Baseline: one GP per testing structure, fitted on its context only.
    The training population is not used.
    """

    def __init__(self, settings: GpSettings):
        self._settings = settings

    def fit_population(self, train_tasks: List[TaskDataset], validation_task: Optional[TaskDataset]) -> None:
        pass

    def predict(self, context_x, context_y, query_x) -> np.ndarray:
        models = gp_fit_multi(context_x, context_y, self._settings)
        return gp_predict_multi(models, query_x)[0]

    def history(self) -> List[EpochRecord]:
        return []
