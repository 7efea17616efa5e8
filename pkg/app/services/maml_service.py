"""
MAML Service - population meta-training, validation-based model selection
and test-time adaptation of the tanh MLP
Single Responsibility: everything the meta-learned regressor does with its parameters
"""
import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import torch

from app.interfaces import IFewShotRegressor
from app.models import AdaptationResult, EpochRecord, MetaOptimizer, ParamVector, TaskDataset, TrainingResult
from app.models.architectures import MlpConfig
from app.models.errors import (
    DataError,
    DegenerateTargetError,
    DimensionError,
    NonFiniteError,
    SelectionError,
    TrainingDivergenceError
)
from app.models.settings import MamlConfig, MlpSettings
from app.services.autodiff import grad_through_update, value_and_grad
from app.services.metrics import nmse
from app.services.networks import as_rows, init_params, mlp_apply, mlp_forward, mlp_layout

logger = logging.getLogger(__name__)

Validator = Callable[[ParamVector], float]


def mse_loss(theta: torch.Tensor, layout, x: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
    return torch.mean((mlp_apply(theta, layout, x) - y) ** 2)


def _loss_fn(layout, x: torch.Tensor, y: torch.Tensor):
    return lambda theta: mse_loss(theta, layout, x, y)


@dataclass(frozen=True)
class _TaskTensors:
    task_id: str
    x: torch.Tensor
    y: torch.Tensor


def _tensors(tasks: Sequence[TaskDataset], config: MamlConfig, mlp_config: MlpConfig) -> List[_TaskTensors]:
    if not tasks:
        raise DataError("meta-training needs at least one task")
    needed = config.n_inner_samples + config.n_meta_samples
    out = []
    for task in tasks:
        if task.size < needed:
            raise DataError(
                f"task {task.task_id} has {task.size} rows, {needed} needed per meta-update"
            )
        x, y = task.all_rows()
        out.append(_TaskTensors(
            task.task_id,
            as_rows(x, mlp_config.input_dim, 'task inputs'),
            as_rows(y, mlp_config.output_dim, 'task targets')
        ))
    return out


def _epoch_batch(tasks: List[_TaskTensors], config: MamlConfig, rng: np.random.Generator):
    """Tasks for this epoch plus their (inner, meta) row indices, all drawn from `rng`."""
    order = range(len(tasks))
    if config.batch is not None and config.batch < len(tasks):
        order = rng.choice(len(tasks), size=config.batch, replace=False)
    batch = []
    for i in order:
        task = tasks[int(i)]
        rows = rng.permutation(task.x.shape[0])
        inner = torch.as_tensor(rows[:config.n_inner_samples])
        meta = torch.as_tensor(rows[config.n_inner_samples:config.n_inner_samples + config.n_meta_samples])
        batch.append((task, inner, meta))
    return batch


class _BestCheckpoint:
    """Tracks the lowest finite validation NMSE seen so far."""

    def __init__(self):
        self.epoch: Optional[int] = None
        self.value = float('nan')
        self.params: Optional[ParamVector] = None

    def offer(self, epoch: int, value: float, params: ParamVector) -> None:
        if np.isfinite(value) and (self.epoch is None or value < self.value):
            self.epoch, self.value, self.params = epoch, value, params.clone()


def _meta_optimizer(theta: torch.Tensor, config: MamlConfig) -> Optional[torch.optim.Optimizer]:
    """Adam over `theta` when configured; None means plain steps theta - beta * g."""
    if MetaOptimizer(config.meta_optimizer) is MetaOptimizer.ADAM:
        return torch.optim.Adam([theta], lr=config.beta)
    return None


def _train_loop(
    tasks: Sequence[TaskDataset],
    config: MamlConfig,
    theta0: ParamVector,
    mlp_config: MlpConfig,
    step_fn,
    validator: Optional[Validator],
    on_epoch: Optional[Callable[[EpochRecord], None]]
) -> TrainingResult:
    data = _tensors(tasks, config, mlp_config)
    rng = np.random.default_rng(config.seed)
    theta = theta0.values.detach().clone()
    optimizer = _meta_optimizer(theta, config)
    history: List[EpochRecord] = []
    best = _BestCheckpoint()

    def checkpoint(epoch: int, loss: float):
        val = float('nan')
        if validator is not None and (epoch % config.validate_every == 0 or epoch == config.epochs):
            val = validator(theta0.with_values(theta))
            best.offer(epoch, val, theta0.with_values(theta))
        record = EpochRecord(epoch, loss, val)
        history.append(record)
        if on_epoch is not None:
            on_epoch(record)

    checkpoint(0, float('nan'))
    for epoch in range(1, config.epochs + 1):
        total_loss = 0.0
        total_grad = torch.zeros_like(theta)
        for task, inner, meta in _epoch_batch(data, config, rng):
            try:
                loss, g = step_fn(theta, task, inner, meta)
            except NonFiniteError as exc:
                raise TrainingDivergenceError(epoch, task.task_id, str(exc)) from exc
            if not torch.isfinite(loss):
                raise TrainingDivergenceError(epoch, task.task_id)
            total_loss += float(loss)
            total_grad = total_grad + g
        if optimizer is None:
            theta = theta - config.beta * total_grad
        else:
            # in place: Adam owns `theta`
            theta.grad = total_grad
            optimizer.step()
        checkpoint(epoch, total_loss)
        if epoch % 100 == 0:
            logger.info("epoch %d: loss %.6g", epoch, total_loss)

    final = theta0.with_values(theta)
    if validator is None:
        return TrainingResult(final, history, config.epochs, float('nan'))
    return TrainingResult(best.params or final, history, best.epoch, best.value)


def meta_train(
    tasks: Sequence[TaskDataset],
    config: MamlConfig,
    theta0: ParamVector,
    mlp_config: MlpConfig,
    validator: Optional[Validator] = None,
    on_epoch: Optional[Callable[[EpochRecord], None]] = None
) -> TrainingResult:
    """
    Algorithm: for each task, theta'_i = theta - alpha grad L(D_inner) (k_inner
    times); then theta <- theta - beta * sum_i d L(theta'_i; D_meta) / d theta,
    or an Adam step with learning rate beta on that sum when
    `config.meta_optimizer` is 'adam'.

    The meta-gradient is taken w.r.t. the pre-update theta, through the inner
    update unless `config.second_order` is off. With a validator the returned
    parameters are those of the best-validated epoch.
    """
    layout = theta0.layout

    def step(theta, task, inner, meta):
        return grad_through_update(
            _loss_fn(layout, task.x[meta], task.y[meta]),
            _loss_fn(layout, task.x[inner], task.y[inner]),
            theta, config.alpha, config.k_inner,
            first_order=not config.second_order
        )

    return _train_loop(tasks, config, theta0, mlp_config, step, validator, on_epoch)


def pooled_train(
    tasks: Sequence[TaskDataset],
    config: MamlConfig,
    theta0: ParamVector,
    mlp_config: MlpConfig,
    validator: Optional[Validator] = None,
    on_epoch: Optional[Callable[[EpochRecord], None]] = None
) -> TrainingResult:
    """
    Conventional training on the pooled rows of all tasks: same sampling,
    same step size and aggregation as meta_train, no inner update.
    """
    layout = theta0.layout

    def step(theta, task, inner, meta):
        rows = torch.cat([inner, meta])
        return value_and_grad(_loss_fn(layout, task.x[rows], task.y[rows]), theta)

    return _train_loop(tasks, config, theta0, mlp_config, step, validator, on_epoch)


def adapt(
    theta_star: ParamVector,
    context_x,
    context_y,
    alpha: float,
    n_steps: int,
    mlp_config: MlpConfig,
    queries: Optional[Tuple[np.ndarray, np.ndarray]] = None
) -> AdaptationResult:
    """
    Test-time adaptation: plain gradient steps on the context MSE from theta*.

    The parameters returned are those of the step with the lowest context loss;
    loss_history[0] is the loss before any step. NMSE is filled in when query
    rows are supplied.
    """
    cx = as_rows(context_x, mlp_config.input_dim, 'context inputs')
    cy = as_rows(context_y, mlp_config.output_dim, 'context targets')
    if cx.shape[0] == 0:
        raise DataError("adaptation needs at least one context sample")
    if cx.shape[0] != cy.shape[0]:
        raise DimensionError(f"{cx.shape[0]} context inputs but {cy.shape[0]} targets")
    loss_fn = _loss_fn(theta_star.layout, cx, cy)

    theta = theta_star.values.detach().clone()
    best_theta, best_step = theta, 0
    history: List[float] = []
    for step in range(n_steps + 1):
        try:
            loss, g = value_and_grad(loss_fn, theta)
        except NonFiniteError as exc:
            raise TrainingDivergenceError(step, 'adaptation', str(exc)) from exc
        history.append(float(loss))
        if history[-1] < history[best_step]:
            best_theta, best_step = theta, step
        if step < n_steps:
            theta = theta - alpha * g

    adapted = theta_star.with_values(best_theta)
    score = float('nan')
    if queries is not None:
        qx, qy = queries
        predictions = mlp_forward(adapted, mlp_config, as_rows(qx, mlp_config.input_dim, 'queries'))
        try:
            score = nmse(predictions.detach().numpy(), qy)
        except DegenerateTargetError:
            logger.warning("adaptation queries have zero variance; NMSE left undefined")
    return AdaptationResult(adapted, history, best_step, score)


def candidate_seed(base_seed: int, hidden: int, init: int) -> int:
    return int(np.random.SeedSequence([base_seed, hidden, init]).generate_state(1)[0])


def select_hyperparameters(
    train_tasks: Sequence[TaskDataset],
    validation_task: Optional[TaskDataset],
    mlp_settings: MlpSettings,
    config: MamlConfig,
    input_dim: int = 1,
    output_dim: int = 1
) -> Tuple[MlpConfig, TrainingResult]:
    """
    Meta-train every (hidden size, initialisation) candidate and keep the
    checkpoint with the lowest NMSE on the validation structure's unseen rows,
    after adapting on its first n_inner_samples rows. Candidates whose
    validation never yields a finite NMSE, or whose training diverges, are
    skipped. Without a validation task the lowest final meta-loss wins.
    """
    validator = None
    if validation_task is not None:
        context, unseen = validation_task.holdout_split(config.n_inner_samples, config.seed)

    best_config, best_result, best_score = None, None, float('inf')
    for hidden in mlp_settings.hidden_sizes:
        mlp_config = MlpConfig(input_dim=input_dim, hidden_dim=hidden, output_dim=output_dim)
        if validation_task is not None:
            def validator(params, _cfg=mlp_config):
                return adapt(params, context[0], context[1], config.alpha, config.adapt_steps,
                             _cfg, queries=unseen).nmse
        for init in range(mlp_settings.n_inits):
            theta0 = init_params(mlp_layout(mlp_config), candidate_seed(config.seed, hidden, init))
            try:
                result = meta_train(train_tasks, config, theta0, mlp_config, validator)
            except TrainingDivergenceError as exc:
                logger.warning("candidate hidden=%d init=%d excluded: %s", hidden, init, exc)
                continue
            score = result.best_val_nmse if validator is not None else _final_loss(result)
            if not np.isfinite(score):
                logger.warning("candidate hidden=%d init=%d has no finite validation score",
                               hidden, init)
                continue
            logger.info("candidate hidden=%d init=%d: score %.4g at epoch %s",
                        hidden, init, score, result.best_epoch)
            if score < best_score:
                best_config, best_result, best_score = mlp_config, result, score

    if best_config is None:
        raise SelectionError("every MAML candidate failed")
    return best_config, best_result


def _final_loss(result: TrainingResult) -> float:
    losses = [r.loss for r in result.history if np.isfinite(r.loss)]
    return losses[-1] if losses else float('nan')


class MamlRegressor(IFewShotRegressor):
    """Meta-learned MLP: selected on the validation structure, adapted per test structure."""

    def __init__(self, mlp_settings: MlpSettings, config: MamlConfig):
        self._mlp_settings = mlp_settings
        self._config = config
        self._mlp_config: Optional[MlpConfig] = None
        self._result: Optional[TrainingResult] = None

    @property
    def mlp_config(self) -> Optional[MlpConfig]:
        return self._mlp_config

    @property
    def params(self) -> Optional[ParamVector]:
        return self._result.params if self._result is not None else None

    def fit_population(self, train_tasks: List[TaskDataset], validation_task: Optional[TaskDataset]) -> None:
        self._mlp_config, self._result = select_hyperparameters(
            train_tasks, validation_task, self._mlp_settings, self._config,
            output_dim=train_tasks[0].output_dim
        )

    def predict(self, context_x, context_y, query_x) -> np.ndarray:
        adapted = adapt(self._result.params, context_x, context_y,
                        self._config.alpha, self._config.adapt_steps, self._mlp_config)
        out = mlp_forward(adapted.params, self._mlp_config,
                          as_rows(query_x, self._mlp_config.input_dim, 'queries'))
        return out.detach().numpy()

    def history(self) -> List[EpochRecord]:
        return list(self._result.history) if self._result is not None else []
