from dataclasses import replace

import numpy as np
import pytest
import torch

from app.models import SplitTag, TaskDataset
from app.models.errors import DataError
from app.models.settings import CnpSettings
from app.services.cnp_service import CnpRegressor, cnp_config_for, train_cnp
from app.services.networks import cnp_layout, init_params
from app.services.population_service import UNBOUNDED


def line_task(task_id, slope, n=25):
    x = np.linspace(-1.5, 1.5, n)
    return TaskDataset(task_id, x, 0.3 * slope * x, np.full(n, SplitTag.TRAIN.value, dtype=object),
                       valid_range=UNBOUNDED)


@pytest.fixture
def tasks():
    return [line_task(f'task-{i}', s) for i, s in enumerate([0.5, 1.0, 1.5, 2.0])]


@pytest.fixture
def settings():
    return CnpSettings(embedding_dim=6, hidden_dim=12, epochs=6, max_context=4, n_targets=8,
                       learning_rate=1e-2, seed=2)


def test_zero_epochs_returns_initialisation(tasks, settings):
    settings = replace(settings, epochs=0)
    config = cnp_config_for(settings)
    theta0 = init_params(cnp_layout(config), settings.seed)
    result = train_cnp(tasks, config, settings, theta0, validation_task=line_task('val', 1.2))
    assert torch.equal(result.params.values, theta0.values)
    assert len(result.history) == 1


def test_training_is_deterministic(tasks, settings):
    config = cnp_config_for(settings)
    first = train_cnp(tasks, config, settings)
    second = train_cnp(tasks, config, settings)
    assert torch.equal(first.params.values, second.params.values)
    assert [r.loss for r in first.history[1:]] == [r.loss for r in second.history[1:]]


def test_history_and_best_epoch(tasks, settings):
    result = train_cnp(tasks, cnp_config_for(settings), settings,
                       validation_task=line_task('val', 1.2))
    assert [r.epoch for r in result.history] == list(range(settings.epochs + 1))
    scores = [r.val_nmse for r in result.history if np.isfinite(r.val_nmse)]
    assert result.best_val_nmse == min(scores)


def test_training_needs_tasks(settings):
    with pytest.raises(DataError):
        train_cnp([], cnp_config_for(settings), settings)


def test_regressor_conditions_on_context(tasks, settings):
    regressor = CnpRegressor(settings)
    regressor.fit_population(tasks, None)
    out = regressor.predict(np.array([0.2]), np.array([[0.1]]), np.linspace(-1, 1, 7))
    assert out.shape == (7, 1)
    assert len(regressor.history()) == settings.epochs + 1
