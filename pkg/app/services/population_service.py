"""
Population Service - draws populations of structures and builds their regression tasks
Single Responsibility: turns PopulationConfig + seeds into train/validation/test TaskDatasets
"""
import logging
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.interfaces import IFrfSource
from app.models import FrfMethod, Problem, SplitTag, StructureSpec, TaskDataset
from app.models.settings import LabSettings, PopulationConfig
from app.services.dynamics_service import DirectFrfSource, frequency_grid
from app.services.feature_service import (
    AffineScaler,
    PcaBasis,
    choose_components,
    pca_fit,
    pca_transform
)
from app.services.spectral_service import TimeDomainFrfSource

logger = logging.getLogger(__name__)

UNBOUNDED = (-np.inf, np.inf)


@dataclass(frozen=True)
class RawTask:
    """A structure with its temperatures, split tags and log-FRF samples (n, n_freqs)."""
    spec: StructureSpec
    temperatures: np.ndarray
    splits: np.ndarray
    samples: np.ndarray


@dataclass
class Population:
    """
    Tasks of one population draw. Task targets live in model space (log
    magnitude of the line, or PCA coordinates); the scalers map temperatures
    and targets into the learners' standardized space.
    """
    problem: Problem
    train_tasks: List[TaskDataset]
    validation_task: Optional[TaskDataset]
    test_tasks: List[TaskDataset]
    input_scaler: AffineScaler
    target_scaler: AffineScaler
    freqs: np.ndarray
    basis: Optional[PcaBasis] = None

    def standardize(self, task: TaskDataset) -> TaskDataset:
        return replace(
            task,
            temperatures=self.input_scaler.transform(task.temperatures),
            targets=self.target_scaler.transform(task.targets),
            valid_range=UNBOUNDED
        )

    def scaled_training(self) -> Tuple[List[TaskDataset], Optional[TaskDataset]]:
        validation = self.standardize(self.validation_task) if self.validation_task else None
        return [self.standardize(t) for t in self.train_tasks], validation

    def scale_inputs(self, temperatures) -> np.ndarray:
        return self.input_scaler.transform(np.asarray(temperatures, dtype=float))

    def scale_targets(self, targets) -> np.ndarray:
        return self.target_scaler.transform(np.asarray(targets, dtype=float))

    def unscale_targets(self, targets) -> np.ndarray:
        return self.target_scaler.inverse_transform(np.asarray(targets, dtype=float))


def frf_source(settings: LabSettings, seed: int = 0) -> IFrfSource:
    """FRF generator selected by `dynamics.frf_method`."""
    dyn = settings.dynamics
    if FrfMethod(dyn.frf_method) is FrfMethod.TIME_DOMAIN:
        return TimeDomainFrfSource(
            dt=dyn.dt, n_steps=dyn.n_steps, noise_std=dyn.noise_std,
            n_segments=dyn.n_segments, overlap=dyn.overlap, window=dyn.window,
            excited_dof=dyn.excited_dof, observed_dof=dyn.observed_dof, seed=seed
        )
    return DirectFrfSource(dyn.excited_dof, dyn.observed_dof)


def problem_freqs(problem: Problem, settings: LabSettings) -> np.ndarray:
    """The single target line for problems 1 and 2, the full grid for problem 3."""
    if problem.target_frequency is not None:
        return np.array([problem.target_frequency])
    dyn = settings.dynamics
    return frequency_grid(dyn.freq_start, dyn.freq_stop, dyn.freq_step)


def frf_samples(source: IFrfSource, spec: StructureSpec, temperatures, freqs,
                log_magnitude: bool = True) -> np.ndarray:
    """FRF magnitudes (n_temperatures, n_freqs), log10 when requested."""
    rows = np.array([source.frf(spec, t, freqs).magnitude for t in np.asarray(temperatures)])
    return np.log10(rows) if log_magnitude else rows


def draw_stiffness(rng: np.random.Generator, k_range: Sequence[float], n: int) -> np.ndarray:
    return rng.uniform(k_range[0], k_range[1], size=n)


def repetition_streams(population: PopulationConfig, repetition: int) -> Dict[str, np.random.SeedSequence]:
    """
    Independent seed sequences for the training, validation and test draws of
    one repetition. A test_seed replaces only the test stream.
    """
    root = np.random.SeedSequence(population.seed)
    rep = root.spawn(repetition + 1)[repetition]
    train, validation, test = rep.spawn(3)
    if population.test_seed is not None:
        test = np.random.SeedSequence([population.test_seed, repetition])
    return {'train': train, 'validation': validation, 'test': test}


def _child(sequence: np.random.SeedSequence, key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(
        entropy=sequence.entropy, spawn_key=tuple(sequence.spawn_key) + (int(key),)
    ))


def dense_temperatures(population: PopulationConfig) -> np.ndarray:
    low, high = population.temperature_range
    return np.linspace(low, high, population.n_train_temperatures)


def draw_test_population(problem: Problem, settings: LabSettings, repetition: int = 0) -> List[RawTask]:
    """
    Test structures with a context pool (draw order kept, so smaller contexts
    are prefixes of larger ones) and uniformly drawn query temperatures.
    """
    pop = settings.population
    rng = np.random.default_rng(repetition_streams(pop, repetition)['test'])
    low, high = pop.temperature_range
    grid = np.linspace(low, high, pop.context_grid_size)
    n_pool = max(pop.context_sizes)
    source = frf_source(settings, pop.seed)
    freqs = problem_freqs(problem, settings)

    tasks = []
    for j, k in enumerate(draw_stiffness(rng, pop.k_range, pop.n_test)):
        context = grid[rng.permutation(grid.size)[:n_pool]]
        queries = rng.uniform(low, high, size=pop.n_queries)
        temperatures = np.concatenate([context, queries])
        splits = np.array([SplitTag.CONTEXT.value] * n_pool + [SplitTag.QUERY.value] * pop.n_queries,
                          dtype=object)
        spec = settings.dynamics.structure(float(k), f'test-{j:03d}')
        tasks.append(RawTask(spec, temperatures, splits,
                             frf_samples(source, spec, temperatures, freqs,
                                         settings.features.log_magnitude)))
    return tasks


def draw_training_population(
    problem: Problem,
    settings: LabSettings,
    repetition: int,
    n_train: int
) -> Tuple[List[RawTask], Optional[RawTask]]:
    """Training structures and the validation structure, each on the dense temperature grid."""
    pop = settings.population
    streams = repetition_streams(pop, repetition)
    source = frf_source(settings, pop.seed)
    freqs = problem_freqs(problem, settings)
    temperatures = dense_temperatures(pop)
    splits = np.array([SplitTag.TRAIN.value] * temperatures.size, dtype=object)

    def raw(k, structure_id):
        spec = settings.dynamics.structure(float(k), structure_id)
        return RawTask(spec, temperatures, splits,
                       frf_samples(source, spec, temperatures, freqs, settings.features.log_magnitude))

    train_k = draw_stiffness(_child(streams['train'], n_train), pop.k_range, n_train)
    train = [raw(k, f'train-{i:02d}') for i, k in enumerate(train_k)]
    validation = None
    if pop.n_validation:
        val_k = draw_stiffness(_child(streams['validation'], n_train), pop.k_range, 1)
        validation = raw(val_k[0], 'validation')
    return train, validation


def build_population(
    problem: Problem,
    settings: LabSettings,
    train: List[RawTask],
    validation: Optional[RawTask],
    test: List[RawTask]
) -> Population:
    """
    Fit the PCA basis (problem 3) and the scalers on the training structures
    only, then express every task in model space.
    """
    features = settings.features
    basis = None
    if problem is Problem.FULL_FRF:
        pooled = np.vstack([r.samples for r in train])
        r = choose_components(pooled, features.pca_variance, features.pca_max_components)
        basis = pca_fit(pooled, r)

    def targets(raw: RawTask) -> np.ndarray:
        return pca_transform(basis, raw.samples) if basis is not None else raw.samples

    def task(raw: RawTask) -> TaskDataset:
        return TaskDataset(raw.spec.structure_id, raw.temperatures, targets(raw), raw.splits,
                           raw.spec.base_stiffness, tuple(settings.dynamics.temperature_range))

    train_tasks = [task(r) for r in train]
    input_scaler = AffineScaler('standard').fit(np.concatenate([t.temperatures for t in train_tasks]))
    target_scaler = AffineScaler('range', features.target_range).fit(
        np.vstack([t.targets for t in train_tasks])
    )
    return Population(
        problem=problem,
        train_tasks=train_tasks,
        validation_task=task(validation) if validation is not None else None,
        test_tasks=[task(r) for r in test],
        input_scaler=input_scaler,
        target_scaler=target_scaler,
        freqs=problem_freqs(problem, settings),
        basis=basis
    )


def generate_population(
    problem: Problem,
    settings: LabSettings,
    repetition: int = 0,
    n_train: Optional[int] = None
) -> Population:
    """One population draw: n_train training structures, validation structure, test population."""
    problem = Problem(problem)
    n_train = n_train if n_train is not None else max(settings.population.n_train_structures)
    train, validation = draw_training_population(problem, settings, repetition, n_train)
    test = draw_test_population(problem, settings, repetition)
    logger.info("population: problem %d, repetition %d, %d train / %d test structures",
                problem.value, repetition, len(train), len(test))
    return build_population(problem, settings, train, validation, test)


def simulated_population(problem: Problem, settings: LabSettings, n_structures: int,
                         repetition: int = 0) -> Population:
    """`n_structures` training structures on the dense temperature grid, no test population."""
    train, _ = draw_training_population(Problem(problem), settings, repetition, n_structures)
    return build_population(Problem(problem), settings, train, None, [])
