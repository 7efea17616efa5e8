"""
Experiment Service - the repetition protocol comparing MAML, CNP and GP
Single Responsibility: runs the (problem, method, n_train, n_context) grid and collects NMSEs
"""
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch

from app.interfaces import IFewShotRegressor
from app.models import (
    CellResult,
    CellStatus,
    ConvergenceRecord,
    ExperimentReport,
    FitExample,
    Method,
    Problem
)
from app.models.errors import LabError, OutputError
from app.models.settings import LabSettings
from app.services.cnp_service import CnpRegressor
from app.services.feature_service import pca_transform
from app.services.gp_service import GpRegressor
from app.services.maml_service import MamlRegressor
from app.services.metrics import nmse
from app.services.population_service import (
    Population,
    build_population,
    draw_test_population,
    draw_training_population,
    frf_samples,
    frf_source
)

logger = logging.getLogger(__name__)

PARTIAL_DIR = 'partial'

# torch and scipy report numerical trouble as RuntimeError or ValueError
CELL_FAILURES = (LabError, RuntimeError, ValueError)

__all__ = ['nmse', 'make_regressor', 'evaluate_method', 'run_repetition', 'run_experiment',
           'report_to_dict', 'report_from_dict']


def make_regressor(method: Method, settings: LabSettings) -> IFewShotRegressor:
    method = Method(method)
    if method is Method.MAML:
        return MamlRegressor(settings.mlp, settings.maml)
    if method is Method.CNP:
        return CnpRegressor(settings.cnp)
    return GpRegressor(settings.gp)


def _predict(regressor: IFewShotRegressor, population: Population, cx, cy, qx) -> np.ndarray:
    scaled = regressor.predict(population.scale_inputs(cx), population.scale_targets(cy),
                               population.scale_inputs(qx))
    return population.unscale_targets(scaled)


def _fit_examples(regressor, population: Population, settings: LabSettings, method: Method,
                  n_train: int, n_context: int) -> List[FitExample]:
    """Truth vs prediction along a temperature sweep for the first test structure."""
    task = population.test_tasks[0]
    low, high = settings.population.temperature_range
    sweep = np.linspace(low, high, settings.experiment.fit_example_points)
    spec = settings.dynamics.structure(task.stiffness, task.task_id)
    truth = frf_samples(frf_source(settings, settings.population.seed), spec, sweep,
                        population.freqs, settings.features.log_magnitude)
    if population.basis is not None:
        truth = pca_transform(population.basis, truth)
    cx, cy = task.context(n_context)
    prediction = _predict(regressor, population, cx, cy, sweep)
    return [
        FitExample(population.problem.value, method.value, n_train, n_context, task.task_id,
                   dim, float(t), float(truth[i, dim]), float(prediction[i, dim]))
        for dim in range(truth.shape[1])
        for i, t in enumerate(sweep)
    ]


def evaluate_method(
    method: Method,
    population: Population,
    settings: LabSettings,
    repetition: int,
    n_train: int,
    with_examples: bool = False
) -> ExperimentReport:
    """
    Fit one method on the training population, then score it on every test
    structure for each context size. Failures are recorded per cell.
    """
    method = Method(method)
    problem = population.problem.value
    report = ExperimentReport()
    context_sizes = settings.population.context_sizes

    def failed(n_context, exc):
        logger.warning("problem %d %s n_train=%d n_context=%d rep %d failed: %s",
                       problem, method.value, n_train, n_context, repetition, exc)
        return CellResult(problem, method.value, n_train, n_context, repetition,
                          float('nan'), float('nan'), CellStatus.FAILED.value, str(exc))

    regressor = make_regressor(method, settings)
    try:
        regressor.fit_population(*population.scaled_training())
    except CELL_FAILURES as exc:
        report.cells.extend(failed(n, exc) for n in context_sizes)
        return report
    report.convergence.extend(
        ConvergenceRecord(problem, method.value, n_train, repetition, r.epoch, r.loss, r.val_nmse)
        for r in regressor.history()
    )

    for n_context in context_sizes:
        try:
            scores = []
            for task in population.test_tasks:
                cx, cy = task.context(n_context)
                qx, qy = task.queries()
                scores.append(nmse(_predict(regressor, population, cx, cy, qx), qy))
            report.cells.append(CellResult(
                problem, method.value, n_train, n_context, repetition,
                float(np.mean(scores)), float(np.median(scores)), CellStatus.OK.value
            ))
            if with_examples:
                report.fit_examples.extend(
                    _fit_examples(regressor, population, settings, method, n_train, n_context)
                )
        except CELL_FAILURES as exc:
            report.cells.append(failed(n_context, exc))
    return report


def run_repetition(
    settings: LabSettings,
    repetition: int,
    problems: Sequence[int],
    methods: Sequence[str]
) -> ExperimentReport:
    """
    One repetition of every problem. The test population is drawn once per
    problem and shared by every n_train and method.
    """
    torch.set_num_threads(1)
    report = ExperimentReport()
    largest = max(settings.population.n_train_structures)
    for problem in problems:
        problem = Problem(problem)
        test = draw_test_population(problem, settings, repetition)
        for n_train in settings.population.n_train_structures:
            train, validation = draw_training_population(problem, settings, repetition, n_train)
            population = build_population(problem, settings, train, validation, test)
            for method in methods:
                report.extend(evaluate_method(
                    method, population, settings, repetition, n_train,
                    with_examples=(repetition == 0 and n_train == largest)
                ))
        logger.info("repetition %d: problem %d done", repetition, problem.value)
    return report


# Serialization --------------------------------------------------------------------

def report_to_dict(report: ExperimentReport) -> Dict:
    return {
        'cells': [asdict(c) for c in report.cells],
        'convergence': [asdict(c) for c in report.convergence],
        'fit_examples': [asdict(f) for f in report.fit_examples],
    }


def report_from_dict(data: Dict) -> ExperimentReport:
    return ExperimentReport(
        cells=[CellResult(**c) for c in data.get('cells', [])],
        convergence=[ConvergenceRecord(**c) for c in data.get('convergence', [])],
        fit_examples=[FitExample(**f) for f in data.get('fit_examples', [])]
    )


def _partial_path(output_dir, repetition: int, problem: int) -> Path:
    return Path(output_dir) / PARTIAL_DIR / f'rep-{repetition:04d}-problem-{problem}.json'


def _load_partial(output_dir, repetition: int, problem: int, fingerprint: str) -> Optional[ExperimentReport]:
    path = _partial_path(output_dir, repetition, problem)
    if not path.exists():
        return None
    data = json.loads(path.read_text(encoding='utf-8'))
    if data.get('fingerprint') != fingerprint:
        logger.warning("ignoring %s: written with different settings", path)
        return None
    return report_from_dict(data['report'])


def _save_partial(output_dir, repetition: int, problem: int, fingerprint: str,
                  report: ExperimentReport) -> None:
    path = _partial_path(output_dir, repetition, problem)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps({
            'fingerprint': fingerprint,
            'repetition': repetition,
            'problem': problem,
            'report': report_to_dict(report),
        }, sort_keys=True), encoding='utf-8')
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror}") from exc


def _job(args):
    settings, repetition, problem, methods = args
    return run_repetition(settings, repetition, [problem], methods)


def run_experiment(
    settings: LabSettings,
    problems: Optional[Sequence[int]] = None,
    methods: Optional[Sequence[str]] = None,
    workers: Optional[int] = None,
    output_dir=None,
    resume: bool = False,
    on_partial: Optional[Callable[[int, int], None]] = None
) -> ExperimentReport:
    """
    All repetitions of the configured grid. Each (repetition, problem) pair is
    one job for the worker pool; results are reduced in repetition order, then
    problem order, so the report does not depend on the worker count. With an
    output directory every finished job is saved under partial/, and `resume`
    reuses those files.
    """
    problems = [Problem(p).value for p in (problems or settings.experiment.problems)]
    methods = [Method(m).value for m in (methods or settings.experiment.methods)]
    fingerprint = settings.fingerprint()
    units = [(rep, problem) for rep in range(settings.population.n_repetitions) for problem in problems]

    results: Dict[Tuple[int, int], ExperimentReport] = {}
    if resume and output_dir is not None:
        for rep, problem in units:
            loaded = _load_partial(output_dir, rep, problem, fingerprint)
            if loaded is not None:
                results[(rep, problem)] = loaded
        logger.info("resuming: %d of %d jobs already done", len(results), len(units))

    jobs = [(settings, rep, problem, methods) for rep, problem in units if (rep, problem) not in results]
    workers = workers or os.cpu_count() or 1

    def collect(job, report):
        _, rep, problem, _ = job
        results[(rep, problem)] = report
        if output_dir is not None:
            _save_partial(output_dir, rep, problem, fingerprint, report)
        if on_partial is not None:
            on_partial(rep, problem)

    if workers == 1 or len(jobs) <= 1:
        for job in jobs:
            collect(job, _job(job))
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            for job, report in zip(jobs, pool.map(_job, jobs)):
                collect(job, report)

    final = ExperimentReport()
    for unit in units:
        final.extend(results[unit])
    return final
