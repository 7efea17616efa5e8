"""
Lab Commands Blueprint - simulate | train | experiment | report
Single Responsibility: Only handles the command-line surface; work is done by services
"""
import functools
from pathlib import Path

import click
import numpy as np
from flask import Blueprint, current_app

from app.models import Method, Problem, TaskDataset
from app.models.errors import LabError, OutputError
from app.models.manifest import RunManifest
from app.models.settings import load_settings
from app.services.checkpoint_service import Checkpoint, save_checkpoint, write_training_log
from app.services.cnp_service import cnp_config_for, train_cnp
from app.services.dataset_service import (
    load_basis,
    load_dataset,
    spectral_line_table,
    write_dataset
)
from app.services.dynamics_service import DirectFrfSource
from app.services.experiment_service import run_experiment
from app.services.feature_service import AffineScaler
from app.services.maml_service import select_hyperparameters
from app.services.networks import cnp_layout, init_params
from app.services.population_service import UNBOUNDED, simulated_population
from app.services.report_service import emit_report, regenerate_report
from app.services.spectral_service import spectral_line_sweep

# Create blueprint; commands are registered at the top level of the CLI
lab_bp = Blueprint('lab', __name__, cli_group=None)

SWEEP_STIFFNESSES = (8000.0, 9000.0, 10000.0, 11000.0, 12000.0)
SPECTRAL_LINES_CSV = 'spectral_lines.csv'
CHECKPOINT_JSON = 'checkpoint.json'
TRAINING_LOG_CSV = 'training_log.csv'


def handles_lab_errors(command):
    """Report LabError subclasses on stderr and exit with their stable code."""
    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except LabError as exc:
            current_app.logger.debug("command failed", exc_info=exc)
            click.echo(f"error: {exc}", err=True)
            raise SystemExit(int(exc.exit_code))
    return wrapper


def common_options(command):
    """--config, --out, --seed, --preset shared by every command."""
    options = [
        click.option('--config', 'config_path', type=click.Path(dir_okay=False),
                     help='YAML settings file overlaid on the preset.'),
        click.option('--out', 'out_dir', type=click.Path(file_okay=False),
                     help='Output directory (default: $POPLAB_OUTPUT_DIR or ./results).'),
        click.option('--seed', type=int, help='Override every seed in the settings.'),
        click.option('--preset', type=click.Choice(['desk', 'paper', 'testing']),
                     help='Numerical preset (default from the app config).'),
    ]
    for option in reversed(options):
        command = option(command)
    return command


def _settings(config_path, preset, seed):
    preset = preset or current_app.config['PRESET']
    return preset, load_settings(config_path, preset=preset, seed=seed)


def _out(out_dir) -> Path:
    path = Path(out_dir or current_app.config['OUTPUT_DIR'])
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create output directory {path}: {exc.strerror}") from exc
    return path


def _manifest(command, preset, settings, **extra) -> RunManifest:
    return RunManifest.start(command, preset, current_app.config['APP_VERSION'], settings, **extra)


# ============================================================================
# SIMULATE
# ============================================================================

@lab_bp.cli.command('simulate')
@common_options
@handles_lab_errors
def simulate(config_path, out_dir, seed, preset):
    """Simulate a population and write one CSV per structure."""
    preset, settings = _settings(config_path, preset, seed)
    out = _out(out_dir)
    problem = Problem(settings.simulate.problem)
    manifest = _manifest('simulate', preset, settings, problem=problem.value)

    population = simulated_population(problem, settings, settings.simulate.n_structures)
    written = write_dataset(population.train_tasks, out, population.basis)

    temperatures = np.linspace(*settings.population.temperature_range,
                               settings.population.n_train_temperatures)
    specs = [settings.dynamics.structure(k, f'k={k:g}') for k in SWEEP_STIFFNESSES]
    source = DirectFrfSource(settings.dynamics.excited_dof, settings.dynamics.observed_dof)
    lines = {
        f'line_{p.target_frequency:g}hz': spectral_line_sweep(source, specs, temperatures,
                                                              p.target_frequency)
        for p in (Problem.LINE_1HZ, Problem.LINE_50HZ)
    }
    spectral_line_table(SWEEP_STIFFNESSES, temperatures, lines).to_csv(
        out / SPECTRAL_LINES_CSV, index=False, float_format='%.17g', lineterminator='\n'
    )
    written.append(SPECTRAL_LINES_CSV)

    manifest.finish(written).write(out)
    click.echo(f"wrote {len(population.train_tasks)} structures for problem {problem.value} to {out}")


# ============================================================================
# TRAIN
# ============================================================================

def _standardized(tasks, input_scaler, target_scaler):
    return [
        TaskDataset(t.task_id, input_scaler.transform(t.temperatures),
                    target_scaler.transform(t.targets), t.splits, t.stiffness, UNBOUNDED)
        for t in tasks
    ]


@lab_bp.cli.command('train')
@click.option('--method', type=click.Choice([Method.MAML.value, Method.CNP.value]), required=True)
@click.option('--data', 'data_dir', type=click.Path(file_okay=False), required=True,
              help='Directory written by `simulate`.')
@common_options
@handles_lab_errors
def train(method, data_dir, config_path, out_dir, seed, preset):
    """Train MAML or CNP on a simulated dataset; writes a checkpoint and a training log."""
    preset, settings = _settings(config_path, preset, seed)
    tasks = load_dataset(data_dir)
    out = _out(out_dir)
    data_manifest = RunManifest.read(data_dir)
    problem = int(data_manifest.extra.get('problem', settings.simulate.problem)) if data_manifest \
        else settings.simulate.problem
    manifest = _manifest('train', preset, settings, method=method, data=str(data_dir), problem=problem)

    validation = None
    if settings.population.n_validation and len(tasks) >= 2:
        tasks, validation = tasks[:-1], tasks[-1]
    input_scaler = AffineScaler('standard').fit(np.concatenate([t.temperatures for t in tasks]))
    target_scaler = AffineScaler('range', settings.features.target_range).fit(
        np.vstack([t.targets for t in tasks])
    )
    scaled = _standardized(tasks, input_scaler, target_scaler)
    scaled_validation = _standardized([validation], input_scaler, target_scaler)[0] if validation else None
    output_dim = tasks[0].output_dim

    if Method(method) is Method.MAML:
        network, result = select_hyperparameters(scaled, scaled_validation, settings.mlp,
                                                 settings.maml, output_dim=output_dim)
        seed_used = settings.maml.seed
    else:
        network = cnp_config_for(settings.cnp, output_dim=output_dim)
        theta0 = init_params(cnp_layout(network), settings.cnp.seed)
        result = train_cnp(scaled, network, settings.cnp, theta0, scaled_validation)
        seed_used = settings.cnp.seed

    checkpoint = Checkpoint(
        kind=method,
        params=result.params,
        config=network.to_dict(),
        seed=seed_used,
        problem=problem,
        input_scaler=input_scaler,
        target_scaler=target_scaler,
        basis=load_basis(data_dir),
        extra={'best_epoch': result.best_epoch}
    )
    save_checkpoint(checkpoint, out / CHECKPOINT_JSON)
    write_training_log(result.history, out / TRAINING_LOG_CSV)
    manifest.finish([CHECKPOINT_JSON, TRAINING_LOG_CSV]).write(out)
    click.echo(f"trained {method} ({result.params.layout.size} parameters); checkpoint in {out}")


# ============================================================================
# EXPERIMENT / REPORT
# ============================================================================

@lab_bp.cli.command('experiment')
@click.option('--workers', type=click.IntRange(min=1), help='Worker processes (default: all cores).')
@click.option('--resume', is_flag=True, help='Reuse finished repetitions of an interrupted run.')
@common_options
@handles_lab_errors
def experiment(workers, resume, config_path, out_dir, seed, preset):
    """Run the repetition protocol and write results, summaries and charts."""
    out = _out(out_dir)
    previous = RunManifest.read(out) if resume else None
    if previous is not None:
        preset, settings = previous.preset, previous.lab_settings()
        current_app.logger.info("resuming with the settings recorded in %s", out)
    else:
        preset, settings = _settings(config_path, preset, seed)

    manifest = _manifest('experiment', preset, settings)
    manifest.write(out)
    report = run_experiment(
        settings,
        workers=workers or current_app.config.get('WORKERS'),
        output_dir=out,
        resume=resume,
        on_partial=lambda rep, problem: current_app.logger.info(
            "repetition %d, problem %d finished", rep, problem)
    )
    written = emit_report(report, out, settings.experiment.problems)
    manifest.finish(written).write(out)
    failed = sum(1 for c in report.cells if c.status != 'ok')
    click.echo(f"{len(report.cells)} cells ({failed} failed); report in {out}")


@lab_bp.cli.command('report')
@click.option('--results', 'results_dir', type=click.Path(file_okay=False), required=True,
              help='Directory containing results.csv.')
@handles_lab_errors
def report(results_dir):
    """Regenerate summary.csv, trend.csv and charts from results.csv."""
    manifest = RunManifest.read(results_dir)
    problems = manifest.lab_settings().experiment.problems if manifest else None
    written = regenerate_report(results_dir, problems)
    click.echo(f"regenerated {', '.join(written)}")
