"""
Report Service - CSV tables and SVG charts for experiment results
Single Responsibility: everything written to (or regenerated from) a results directory
"""
import logging
from dataclasses import asdict, fields
from pathlib import Path
from typing import Iterable, List, Optional

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402
from scipy import stats  # noqa: E402

from app.models import (  # noqa: E402
    CellResult,
    CellStatus,
    ConvergenceRecord,
    ExperimentReport,
    FitExample,
    Problem
)
from app.models.errors import DataError, OutputError  # noqa: E402

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.17g'
SVG_SALT = 'poplab'

RESULTS_CSV = 'results.csv'
SUMMARY_CSV = 'summary.csv'
TREND_CSV = 'trend.csv'
CONVERGENCE_CSV = 'convergence.csv'
FIT_EXAMPLES_CSV = 'fit_examples.csv'

GROUP_KEYS = ['problem', 'method', 'n_train', 'n_context']
SUMMARY_COLUMNS = GROUP_KEYS + ['mean_nmse', 'std_nmse', 'n_ok', 'n_failed']
TREND_COLUMNS = ['problem', 'method', 'n_context', 'n_points', 'spearman_rho', 'p_value']


def chart_name(problem: int) -> str:
    return f'chart-problem-{int(problem)}.svg'


def _frame(records: Iterable, record_type) -> pd.DataFrame:
    columns = [f.name for f in fields(record_type)]
    return pd.DataFrame([asdict(r) for r in records], columns=columns)


def results_frame(report: ExperimentReport) -> pd.DataFrame:
    frame = _frame(report.cells, CellResult)
    return frame.sort_values(['problem', 'method', 'n_train', 'n_context', 'repetition'],
                             kind='mergesort').reset_index(drop=True)


def read_results(path) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise DataError(f"no results file at {path}")
    frame = pd.read_csv(path, dtype={'method': str, 'status': str, 'message': str},
                        keep_default_na=False, na_values={'nmse': ['nan'], 'nmse_median': ['nan']})
    missing = set(GROUP_KEYS + ['repetition', 'nmse', 'status']) - set(frame.columns)
    if missing:
        raise DataError(f"{path} lacks columns {sorted(missing)}")
    return frame


def summarize(results: pd.DataFrame) -> pd.DataFrame:
    """
    Mean and population standard deviation of the per-repetition NMSE of
    every grid cell; failed repetitions are counted, not averaged.
    """
    if results.empty:
        return pd.DataFrame(columns=SUMMARY_COLUMNS)
    ok = results['status'] == CellStatus.OK.value
    rows = []
    for key, group in results.groupby(GROUP_KEYS, sort=True):
        values = group.loc[ok.loc[group.index], 'nmse'].to_numpy(dtype=float)
        rows.append(list(key) + [
            float(values.mean()) if values.size else float('nan'),
            float(values.std()) if values.size else float('nan'),
            int(values.size),
            int(len(group) - values.size),
        ])
    return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)


def population_trend(summary: pd.DataFrame) -> pd.DataFrame:
    """Spearman correlation between n_train and mean NMSE for each (problem, method, n_context)."""
    rows = []
    if not summary.empty:
        for (problem, method, n_context), group in summary.groupby(
                ['problem', 'method', 'n_context'], sort=True):
            group = group.dropna(subset=['mean_nmse'])
            rho, p_value = float('nan'), float('nan')
            if group['n_train'].nunique() >= 2 and group['mean_nmse'].nunique() >= 2:
                result = stats.spearmanr(group['n_train'], group['mean_nmse'])
                rho, p_value = float(result[0]), float(result[1])
            rows.append([problem, method, n_context, len(group), rho, p_value])
    return pd.DataFrame(rows, columns=TREND_COLUMNS)


def _write_csv(frame: pd.DataFrame, path: Path) -> str:
    try:
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep='nan',
                     lineterminator='\n')
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror}") from exc
    return path.name


def plot_problem(summary: pd.DataFrame, problem: int, path: Path) -> str:
    """Error-bar chart of mean NMSE (+/- std) against n_train, one series per method and context size."""
    rows = summary[summary['problem'] == problem] if not summary.empty else summary
    with matplotlib.rc_context({'svg.hashsalt': SVG_SALT, 'svg.fonttype': 'none'}):
        fig, ax = plt.subplots(figsize=(7, 4.5))
        if not rows.empty:
            for (method, n_context), group in rows.groupby(['method', 'n_context'], sort=True):
                group = group.sort_values('n_train')
                ax.errorbar(group['n_train'], group['mean_nmse'], yerr=group['std_nmse'],
                            marker='o', capsize=3, label=f'{method.upper()}, {n_context} ctx')
            ax.legend(fontsize='small', ncol=2)
        ax.set_xlabel('training structures')
        ax.set_ylabel('NMSE [%]')
        ax.set_title(Problem(int(problem)).label)
        ax.grid(True, alpha=0.3)
        try:
            fig.savefig(path, format='svg', metadata={'Date': None})
        except OSError as exc:
            raise OutputError(f"cannot write {path}: {exc.strerror}") from exc
        finally:
            plt.close(fig)
    return path.name


def _output_dir(directory) -> Path:
    path = Path(directory)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create output directory {path}: {exc.strerror}") from exc
    return path


def _problems(results: pd.DataFrame, problems: Optional[Iterable[int]]) -> List[int]:
    if problems is not None:
        return sorted(int(p) for p in problems)
    if not results.empty:
        return sorted(int(p) for p in results['problem'].unique())
    return [p.value for p in Problem]


def regenerate_report(directory, problems: Optional[Iterable[int]] = None) -> List[str]:
    """Summary, trend and charts from an existing results.csv; no model is refitted."""
    out = Path(directory)
    results = read_results(out / RESULTS_CSV)
    summary = summarize(results)
    written = [
        _write_csv(summary, out / SUMMARY_CSV),
        _write_csv(population_trend(summary), out / TREND_CSV),
    ]
    for problem in _problems(results, problems):
        written.append(plot_problem(summary, problem, out / chart_name(problem)))
    logger.info("report: %d summary rows, %d files", len(summary), len(written))
    return written


def emit_report(report: ExperimentReport, directory, problems: Optional[Iterable[int]] = None) -> List[str]:
    """Write results, convergence and fit-example tables, then derive the summary files."""
    out = _output_dir(directory)
    written = [
        _write_csv(results_frame(report), out / RESULTS_CSV),
        _write_csv(_frame(report.convergence, ConvergenceRecord), out / CONVERGENCE_CSV),
        _write_csv(_frame(report.fit_examples, FitExample), out / FIT_EXAMPLES_CSV),
    ]
    written.extend(regenerate_report(out, problems))
    return written


def summary_records(directory) -> List[dict]:
    """summary.csv rows as JSON-ready dicts (NaN -> None)."""
    path = Path(directory) / SUMMARY_CSV
    if not path.exists():
        raise DataError(f"no summary file at {path}")
    frame = pd.read_csv(path)
    return _records(frame)


def _records(frame: pd.DataFrame) -> List[dict]:
    frame = frame.astype(object).where(pd.notna(frame), None)
    return frame.to_dict(orient='records')


def results_records(directory, problem: Optional[int] = None, method: Optional[str] = None) -> List[dict]:
    frame = read_results(Path(directory) / RESULTS_CSV)
    if problem is not None:
        frame = frame[frame['problem'] == problem]
    if method is not None:
        frame = frame[frame['method'] == method]
    return _records(frame)


def mean_nmse(summary: pd.DataFrame, problem: int, method: str, n_context: int) -> np.ndarray:
    """Mean NMSE against n_train for one (problem, method, n_context) series, sorted by n_train."""
    rows = summary[(summary['problem'] == problem) & (summary['method'] == method)
                   & (summary['n_context'] == n_context)].sort_values('n_train')
    return rows['mean_nmse'].to_numpy(dtype=float)
