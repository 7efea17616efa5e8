"""
Flask Application Factory
Wires configuration, logging, the lab commands and the reports viewer together
"""
from flask import Flask, jsonify

from config import Config


def create_app(config_class=Config):
    """
    Build the lab application: CLI commands plus the reports viewer.

    Args:
        config_class: Preset class from config.py (OUTPUT_DIR, PRESET, WORKERS, ...)

    Returns:
        Flask application whose CLI exposes simulate/train/experiment/report
    """
    app = Flask(__name__)
    app.config.from_object(config_class)
    config_class.init_app(app)

    # Register blueprints (commands + reports viewer)
    register_blueprints(app)

    # Register error handlers
    register_error_handlers(app)

    # Register index route
    register_index_route(app)

    return app


def register_blueprints(app):
    """
    Register all application blueprints.
    The lab blueprint only contributes CLI commands.
    """
    from app.blueprints import lab_bp, reports_bp

    app.register_blueprint(lab_bp)
    app.register_blueprint(reports_bp)

    app.logger.debug("Registered blueprints: lab (CLI), reports (/reports)")


def register_error_handlers(app):
    """Register JSON error handlers for common HTTP errors."""

    @app.errorhandler(404)
    def not_found_error(error):
        return jsonify({'success': False, 'message': 'Not found'}), 404

    @app.errorhandler(500)
    def internal_error(error):
        return jsonify({'success': False, 'message': 'Internal server error'}), 500


def register_index_route(app):
    """Register the index route."""

    @app.route('/')
    def index():
        """Application name, version and the report endpoints."""
        return jsonify({
            'success': True,
            'app': app.config['APP_NAME'],
            'version': app.config['APP_VERSION'],
            'preset': app.config['PRESET'],
            'endpoints': [
                '/reports/api/summary',
                '/reports/api/results',
                '/reports/charts/<problem>.svg'
            ]
        })
