"""
CNP Service - training of the Conditional Neural Process on the training population
Single Responsibility: fits the encoder/decoder weights; prediction is a forward pass
"""
import logging
from typing import Callable, List, Optional, Sequence

import numpy as np
import torch

from app.interfaces import IFewShotRegressor
from app.models import EpochRecord, ParamVector, TaskDataset, TrainingResult
from app.models.architectures import CnpConfig
from app.models.errors import DataError, DegenerateTargetError, TrainingDivergenceError
from app.models.settings import CnpSettings
from app.services.metrics import nmse
from app.services.networks import as_rows, cnp_apply, cnp_layout, cnp_predict, init_params

logger = logging.getLogger(__name__)


def cnp_config_for(settings: CnpSettings, input_dim: int = 1, output_dim: int = 1) -> CnpConfig:
    return CnpConfig(input_dim=input_dim, output_dim=output_dim,
                     embedding_dim=settings.embedding_dim, hidden_dim=settings.hidden_dim)


def validation_context_size(settings: CnpSettings) -> int:
    return max(1, settings.max_context // 2)


def _validation_score(params: ParamVector, config: CnpConfig, task: TaskDataset,
                      settings: CnpSettings) -> float:
    (cx, cy), (ux, uy) = task.holdout_split(validation_context_size(settings), settings.seed)
    predictions = cnp_predict(params, config, cx, cy, ux).detach().numpy()
    try:
        return nmse(predictions, uy)
    except DegenerateTargetError:
        return float('nan')


def train_cnp(
    tasks: Sequence[TaskDataset],
    config: CnpConfig,
    settings: CnpSettings,
    theta0: Optional[ParamVector] = None,
    validation_task: Optional[TaskDataset] = None,
    on_epoch: Optional[Callable[[EpochRecord], None]] = None
) -> TrainingResult:
    """
    Adam on the flat parameter vector. Each epoch draws, per training task, a
    context of random size in [1, max_context] and up to n_targets disjoint
    target rows; the loss is the task-averaged MSE on the targets. With a
    validation task the best-validated epoch is returned; zero epochs return
    the initialisation.
    """
    if not tasks:
        raise DataError("CNP training needs at least one task")
    for task in tasks:
        if task.size < 2:
            raise DataError(f"task {task.task_id} needs at least two rows")
    if theta0 is None:
        theta0 = init_params(cnp_layout(config), settings.seed)

    data = [(t.task_id, as_rows(t.temperatures, config.input_dim, 'task inputs'),
             as_rows(t.targets, config.output_dim, 'task targets')) for t in tasks]
    rng = np.random.default_rng(settings.seed)
    theta = theta0.values.detach().clone().requires_grad_(True)
    optimizer = torch.optim.Adam([theta], lr=settings.learning_rate)
    history: List[EpochRecord] = []
    best_epoch, best_value, best_values = None, float('nan'), None

    def checkpoint(epoch: int, loss: float):
        nonlocal best_epoch, best_value, best_values
        val = float('nan')
        if validation_task is not None and (epoch % settings.validate_every == 0
                                            or epoch == settings.epochs):
            val = _validation_score(theta0.with_values(theta), config, validation_task, settings)
            if np.isfinite(val) and (best_epoch is None or val < best_value):
                best_epoch, best_value, best_values = epoch, val, theta.detach().clone()
        record = EpochRecord(epoch, loss, val)
        history.append(record)
        if on_epoch is not None:
            on_epoch(record)

    checkpoint(0, float('nan'))
    for epoch in range(1, settings.epochs + 1):
        order = range(len(data))
        if settings.batch_tasks is not None and settings.batch_tasks < len(data):
            order = rng.choice(len(data), size=settings.batch_tasks, replace=False)
        optimizer.zero_grad()
        losses = []
        for i in order:
            task_id, x, y = data[int(i)]
            n = x.shape[0]
            n_context = int(rng.integers(1, min(settings.max_context, n - 1) + 1))
            rows = torch.as_tensor(rng.permutation(n))
            context, target = rows[:n_context], rows[n_context:n_context + settings.n_targets]
            prediction = cnp_apply(theta, theta0.layout, x[context], y[context], x[target])
            loss = torch.mean((prediction - y[target]) ** 2)
            if not torch.isfinite(loss):
                raise TrainingDivergenceError(epoch, task_id)
            losses.append(loss)
        total = torch.stack(losses).mean()
        total.backward()
        if not torch.isfinite(theta.grad).all():
            raise TrainingDivergenceError(epoch, None, "non-finite gradient")
        optimizer.step()
        checkpoint(epoch, float(total.detach()))
        if epoch % 100 == 0:
            logger.info("CNP epoch %d: loss %.6g", epoch, float(total.detach()))

    final = theta0.with_values(theta)
    if validation_task is None or best_values is None:
        return TrainingResult(final, history, settings.epochs if validation_task is None else None,
                              float('nan'))
    return TrainingResult(theta0.with_values(best_values), history, best_epoch, best_value)


class CnpRegressor(IFewShotRegressor):
    """Conditional Neural Process: trained once on the population, conditioned per structure."""

    def __init__(self, settings: CnpSettings):
        self._settings = settings
        self._config: Optional[CnpConfig] = None
        self._result: Optional[TrainingResult] = None

    @property
    def config(self) -> Optional[CnpConfig]:
        return self._config

    @property
    def params(self) -> Optional[ParamVector]:
        return self._result.params if self._result is not None else None

    def fit_population(self, train_tasks: List[TaskDataset], validation_task: Optional[TaskDataset]) -> None:
        self._config = cnp_config_for(self._settings, output_dim=train_tasks[0].output_dim)
        self._result = train_cnp(train_tasks, self._config, self._settings,
                                 validation_task=validation_task)

    def predict(self, context_x, context_y, query_x) -> np.ndarray:
        return cnp_predict(self._result.params, self._config, context_x, context_y,
                           query_x).detach().numpy()

    def history(self) -> List[EpochRecord]:
        return list(self._result.history) if self._result is not None else []
