"""
Reports Blueprint - read-only viewer over an experiment results directory
Single Responsibility: Only handles HTTP routing; files are produced by the report service
"""
from pathlib import Path

from flask import Blueprint, current_app, jsonify, request, send_file
from werkzeug.security import safe_join

from app.models import Method
from app.models.errors import DataError
from app.services.report_service import chart_name, results_records, summary_records

# Create blueprint
reports_bp = Blueprint('reports', __name__, url_prefix='/reports')


def _results_dir() -> str:
    return str(Path(current_app.config['RESULTS_DIR']).resolve())


def _missing(message):
    return jsonify({'success': False, 'message': message}), 404


@reports_bp.route('/api/summary', methods=['GET'])
def get_summary():
    """Mean/std NMSE of every grid cell."""
    try:
        rows = summary_records(_results_dir())
    except DataError as exc:
        return _missing(str(exc))
    return jsonify({'success': True, 'summary': rows})


@reports_bp.route('/api/results', methods=['GET'])
def get_results():
    """Per-repetition NMSE rows, optionally filtered by problem and method."""
    problem = request.args.get('problem', type=int)
    method = request.args.get('method')
    if method is not None:
        try:
            Method(method)
        except ValueError:
            return jsonify({
                'success': False,
                'message': f'Invalid method: {method}'
            }), 400
    try:
        rows = results_records(_results_dir(), problem=problem, method=method)
    except DataError as exc:
        return _missing(str(exc))
    return jsonify({'success': True, 'results': rows})


@reports_bp.route('/charts/<int:problem>.svg', methods=['GET'])
def get_chart(problem):
    """The error-bar chart emitted for one problem."""
    path = safe_join(_results_dir(), chart_name(problem))
    if path is None or not Path(path).is_file():
        return _missing(f'No chart for problem {problem}')
    return send_file(path, mimetype='image/svg+xml')
