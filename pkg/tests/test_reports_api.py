import pytest

from app.models import CellResult, ExperimentReport
from app.services.report_service import emit_report


@pytest.fixture
def published(results_dir):
    cells = [
        CellResult(1, method, n_train, 1, rep, value, value, 'ok')
        for method, value in (('gp', 2.0), ('cnp', 0.5))
        for n_train in (2, 3)
        for rep in range(2)
    ]
    emit_report(ExperimentReport(cells=cells), results_dir, problems=[1])
    return results_dir


def test_index_lists_endpoints(client):
    response = client.get('/')
    assert response.status_code == 200
    body = response.get_json()
    assert body['app'] == 'PopLab'
    assert body['preset'] == 'testing'
    assert '/reports/api/summary' in body['endpoints']


def test_summary(client, published):
    response = client.get('/reports/api/summary')
    assert response.status_code == 200
    body = response.get_json()
    assert body['success'] is True
    assert len(body['summary']) == 4
    gp = [row for row in body['summary'] if row['method'] == 'gp']
    assert all(row['mean_nmse'] == pytest.approx(2.0) for row in gp)


def test_results_filtered_by_method(client, published):
    response = client.get('/reports/api/results?problem=1&method=cnp')
    assert response.status_code == 200
    rows = response.get_json()['results']
    assert len(rows) == 4
    assert {row['method'] for row in rows} == {'cnp'}


def test_results_for_absent_problem_are_empty(client, published):
    assert client.get('/reports/api/results?problem=2').get_json()['results'] == []


def test_invalid_method(client, published):
    response = client.get('/reports/api/results?method=svm')
    assert response.status_code == 400
    assert response.get_json()['success'] is False


def test_chart_is_served_as_svg(client, published):
    response = client.get('/reports/charts/1.svg')
    assert response.status_code == 200
    assert response.mimetype == 'image/svg+xml'
    assert b'<svg' in response.data


def test_missing_chart(client, published):
    response = client.get('/reports/charts/3.svg')
    assert response.status_code == 404
    assert response.get_json()['success'] is False


def test_missing_results_directory(client):
    assert client.get('/reports/api/summary').status_code == 404
    assert client.get('/reports/api/results').status_code == 404


def test_unknown_route_is_json(client):
    response = client.get('/nowhere')
    assert response.status_code == 404
    assert response.get_json() == {'success': False, 'message': 'Not found'}
