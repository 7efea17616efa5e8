import csv
import statistics

import numpy as np
import pandas as pd
import pytest

from app.models import CellResult, ConvergenceRecord, ExperimentReport
from app.models.errors import DataError
from app.services.report_service import (
    RESULTS_CSV,
    SUMMARY_CSV,
    TREND_CSV,
    chart_name,
    emit_report,
    mean_nmse,
    read_results,
    regenerate_report,
    summarize
)

RESULT_HEADER = 'problem,method,n_train,n_context,repetition,nmse,nmse_median,status,message'


def synthetic_report():
    """Two methods, three training sizes, two repetitions; one failed cell."""
    rng = np.random.default_rng(0)
    cells = []
    for method, base in (('gp', 40.0), ('maml', 10.0)):
        for n_train in (2, 3, 4):
            for rep in range(2):
                value = base / n_train + rng.uniform(0, 0.5)
                cells.append(CellResult(1, method, n_train, 1, rep, value, value, 'ok'))
    cells[-1] = CellResult(1, 'maml', 4, 1, 1, float('nan'), float('nan'), 'failed', 'diverged')
    convergence = [ConvergenceRecord(1, 'maml', 2, 0, e, 1.0 / (e + 1), float('nan')) for e in range(3)]
    return ExperimentReport(cells=cells, convergence=convergence)


def test_empty_report_writes_headers_and_blank_charts(tmp_path):
    written = emit_report(ExperimentReport(), tmp_path)
    assert (tmp_path / RESULTS_CSV).read_text() == RESULT_HEADER + '\n'
    assert (tmp_path / SUMMARY_CSV).read_text().count('\n') == 1
    for problem in (1, 2, 3):
        assert chart_name(problem) in written
        assert (tmp_path / chart_name(problem)).read_text().lstrip().startswith('<?xml')


def test_summary_matches_independent_aggregation(tmp_path):
    emit_report(synthetic_report(), tmp_path)
    groups = {}
    with open(tmp_path / RESULTS_CSV, newline='') as handle:
        for row in csv.DictReader(handle):
            if row['status'] == 'ok':
                key = (row['method'], int(row['n_train']))
                groups.setdefault(key, []).append(float(row['nmse']))
    with open(tmp_path / SUMMARY_CSV, newline='') as handle:
        summary = list(csv.DictReader(handle))
    assert len(summary) == 6
    for row in summary:
        values = groups[(row['method'], int(row['n_train']))]
        assert abs(float(row['mean_nmse']) - statistics.fmean(values)) < 1e-12
        assert abs(float(row['std_nmse']) - statistics.pstdev(values)) < 1e-12


def test_failed_repetitions_are_counted_not_averaged():
    results = pd.DataFrame([c.__dict__ for c in synthetic_report().cells])
    summary = summarize(results)
    row = summary[(summary['method'] == 'maml') & (summary['n_train'] == 4)].iloc[0]
    assert (row['n_ok'], row['n_failed']) == (1, 1)


def test_population_trend_is_negative(tmp_path):
    emit_report(synthetic_report(), tmp_path)
    trend = pd.read_csv(tmp_path / TREND_CSV)
    np.testing.assert_allclose(trend['spearman_rho'], -1.0)
    summary = pd.read_csv(tmp_path / SUMMARY_CSV)
    assert np.all(np.diff(mean_nmse(summary, 1, 'gp', 1)) < 0)


def test_rerun_writes_identical_files(tmp_path):
    first, second = tmp_path / 'a', tmp_path / 'b'
    names = emit_report(synthetic_report(), first, problems=[1])
    emit_report(synthetic_report(), second, problems=[1])
    for name in names:
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_regenerate_is_idempotent(tmp_path):
    names = emit_report(synthetic_report(), tmp_path, problems=[1])
    before = {name: (tmp_path / name).read_bytes() for name in names}
    regenerated = regenerate_report(tmp_path, problems=[1])
    for name in regenerated:
        assert (tmp_path / name).read_bytes() == before[name]


def test_results_survive_a_round_trip(tmp_path):
    report = synthetic_report()
    emit_report(report, tmp_path, problems=[1])
    frame = read_results(tmp_path / RESULTS_CSV)
    assert len(frame) == len(report.cells)
    assert frame['nmse'].isna().sum() == 1
    assert set(frame['message']) == {'', 'diverged'}


def test_missing_results_file(tmp_path):
    with pytest.raises(DataError):
        regenerate_report(tmp_path)
