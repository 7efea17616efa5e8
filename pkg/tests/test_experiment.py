from dataclasses import replace

import numpy as np
import pytest

from app.models import CellStatus, Method
from app.models.errors import TrainingDivergenceError
from app.services.cnp_service import CnpRegressor
from app.services.experiment_service import (
    PARTIAL_DIR,
    report_from_dict,
    report_to_dict,
    run_experiment
)
from app.services.gp_service import GpRegressor
from app.services.report_service import results_frame


def with_population(settings, **changes):
    return replace(settings, population=replace(settings.population, **changes))


def cell_keys(report):
    return [c.key() for c in report.cells]


def test_gp_subset_contains_only_gp_cells(gp_only):
    settings = with_population(gp_only, n_repetitions=1, n_test=2)
    report = run_experiment(settings, workers=1)
    pop = settings.population
    assert {c.method for c in report.cells} == {'gp'}
    assert len(report.cells) == len(pop.n_train_structures) * len(pop.context_sizes)
    assert all(c.status == CellStatus.OK.value and c.nmse >= 0 for c in report.cells)
    assert report.convergence == []


def test_every_grid_cell_appears_once(tiny_settings):
    settings = with_population(tiny_settings, n_repetitions=1)
    report = run_experiment(settings, problems=[1], workers=1)
    pop = settings.population
    expected = {(1, m.value, n, c, 0) for m in Method
                for n in pop.n_train_structures for c in pop.context_sizes}
    keys = cell_keys(report)
    assert len(keys) == len(set(keys))
    assert set(keys) == expected
    for cell in report.cells:
        assert (cell.status == CellStatus.OK.value) == np.isfinite(cell.nmse)
    assert {r.method for r in report.convergence} == {'maml', 'cnp'}


def test_failed_fit_marks_cells_failed(tiny_settings, monkeypatch):
    def diverge(self, train_tasks, validation_task):
        raise TrainingDivergenceError(3, 'train-00')

    monkeypatch.setattr(CnpRegressor, 'fit_population', diverge)
    settings = replace(with_population(tiny_settings, n_repetitions=1),
                       experiment=replace(tiny_settings.experiment, methods=('cnp', 'gp')))
    report = run_experiment(settings, problems=[1], workers=1)
    for cell in report.cells:
        if cell.method == 'cnp':
            assert cell.status == CellStatus.FAILED.value
            assert np.isnan(cell.nmse) and 'epoch 3' in cell.message
        else:
            assert cell.status == CellStatus.OK.value


@pytest.mark.parametrize('error', [
    RuntimeError('linalg.cholesky: the factorization could not be completed'),
    ValueError('array must not contain infs or NaNs'),
])
def test_library_errors_during_fit_are_recorded_per_cell(tiny_settings, monkeypatch, error):
    def explode(self, train_tasks, validation_task):
        raise error

    monkeypatch.setattr(CnpRegressor, 'fit_population', explode)
    settings = replace(with_population(tiny_settings, n_repetitions=1),
                       experiment=replace(tiny_settings.experiment, methods=('cnp', 'gp')))
    report = run_experiment(settings, problems=[1], workers=1)
    cnp = [c for c in report.cells if c.method == 'cnp']
    assert cnp and all(c.status == CellStatus.FAILED.value for c in cnp)
    assert all(str(error) in c.message for c in cnp)
    assert all(c.status == CellStatus.OK.value for c in report.cells if c.method == 'gp')


def test_library_error_during_prediction_fails_only_that_cell(gp_only, monkeypatch):
    real = GpRegressor.predict

    def flaky(self, context_x, context_y, query_x):
        if len(context_x) == 1:
            raise ValueError('x must be strictly increasing')
        return real(self, context_x, context_y, query_x)

    monkeypatch.setattr(GpRegressor, 'predict', flaky)
    report = run_experiment(with_population(gp_only, n_repetitions=1, n_test=2), workers=1)
    for cell in report.cells:
        if cell.n_context == 1:
            assert cell.status == CellStatus.FAILED.value
            assert 'strictly increasing' in cell.message
        else:
            assert cell.status == CellStatus.OK.value


def test_fit_examples_come_from_first_repetition_largest_population(gp_only):
    report = run_experiment(gp_only, workers=1)
    largest = max(gp_only.population.n_train_structures)
    assert report.fit_examples
    assert {f.n_train for f in report.fit_examples} == {largest}
    points = gp_only.experiment.fit_example_points
    assert len(report.fit_examples) == points * len(gp_only.population.context_sizes)


def test_result_independent_of_worker_count(gp_only):
    serial = run_experiment(gp_only, workers=1)
    parallel = run_experiment(gp_only, workers=2)
    assert results_frame(serial).equals(results_frame(parallel))


def test_rerun_is_identical(gp_only):
    first = run_experiment(gp_only, workers=1)
    second = run_experiment(gp_only, workers=1)
    assert results_frame(first).equals(results_frame(second))


def test_resume_reuses_partials(gp_only, tmp_path):
    full = run_experiment(gp_only, workers=1, output_dir=tmp_path)
    assert sorted(p.name for p in (tmp_path / PARTIAL_DIR).iterdir()) == \
        ['rep-0000-problem-1.json', 'rep-0001-problem-1.json']

    (tmp_path / PARTIAL_DIR / 'rep-0001-problem-1.json').unlink()
    recomputed = []
    resumed = run_experiment(gp_only, workers=1, output_dir=tmp_path, resume=True,
                             on_partial=lambda rep, problem: recomputed.append((rep, problem)))
    assert recomputed == [(1, 1)]
    assert results_frame(full).equals(results_frame(resumed))


def test_partials_from_other_settings_are_ignored(gp_only, tmp_path):
    run_experiment(gp_only, workers=1, output_dir=tmp_path)
    reseeded = with_population(gp_only, seed=17)
    recomputed = []
    run_experiment(reseeded, workers=1, output_dir=tmp_path, resume=True,
                   on_partial=lambda rep, problem: recomputed.append((rep, problem)))
    assert recomputed == [(0, 1), (1, 1)]


def test_problems_split_into_separate_jobs(gp_only, tmp_path):
    settings = with_population(gp_only, n_repetitions=1, n_test=2)
    together = run_experiment(settings, problems=[1, 2], workers=1, output_dir=tmp_path)
    assert sorted(p.name for p in (tmp_path / PARTIAL_DIR).iterdir()) == \
        ['rep-0000-problem-1.json', 'rep-0000-problem-2.json']
    parallel = run_experiment(settings, problems=[1, 2], workers=2)
    assert results_frame(together).equals(results_frame(parallel))
    assert [c.problem for c in together.cells] == sorted(c.problem for c in together.cells)


def test_report_dict_round_trip(gp_only):
    report = run_experiment(with_population(gp_only, n_repetitions=1), workers=1)
    restored = report_from_dict(report_to_dict(report))
    assert results_frame(restored).equals(results_frame(report))


@pytest.mark.parametrize('problem', [2, 3])
def test_other_problems_run(gp_only, problem):
    settings = with_population(gp_only, n_repetitions=1, n_test=2)
    report = run_experiment(settings, problems=[problem], workers=1)
    assert {c.problem for c in report.cells} == {problem}
    assert all(c.status == CellStatus.OK.value for c in report.cells)
