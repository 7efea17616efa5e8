"""
Shared fixtures: a Flask app on the testing preset, its CLI runner and test
client, and small settings for service-level tests.
"""
from dataclasses import replace

import numpy as np
import pytest

from app import create_app
from app.models.settings import LabSettings
from config import TestingConfig


@pytest.fixture
def results_dir(tmp_path):
    return tmp_path / 'results'


@pytest.fixture
def app(results_dir):
    class _Config(TestingConfig):
        OUTPUT_DIR = str(results_dir)
        RESULTS_DIR = str(results_dir)

    return create_app(_Config)


@pytest.fixture
def runner(app):
    return app.test_cli_runner()


@pytest.fixture
def client(app):
    return app.test_client()


@pytest.fixture
def tiny_settings():
    """Testing preset: two repetitions, four test structures, a handful of epochs."""
    return LabSettings.for_preset('testing').validate()


@pytest.fixture
def gp_only(tiny_settings):
    """Problem 1 with the GP baseline alone; the fastest complete experiment."""
    return replace(
        tiny_settings,
        experiment=replace(tiny_settings.experiment, problems=(1,), methods=('gp',))
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
