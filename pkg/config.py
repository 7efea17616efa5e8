"""
Application Configuration
Uses environment variables for the output location and log level only;
every numerical setting lives in the YAML-backed LabSettings tree.
"""
import logging
import os


class Config:
    """Base configuration class."""

    # Application Settings
    APP_NAME = 'PopLab'
    APP_VERSION = '1.0.0'

    # Numerical preset used when no --preset flag is given
    PRESET = 'desk'

    # Logging
    LOG_LEVEL = os.environ.get('LOG_LEVEL') or 'INFO'

    # Output locations (environment override for the output directory only)
    OUTPUT_DIR = os.environ.get('POPLAB_OUTPUT_DIR') or 'results'
    RESULTS_DIR = os.environ.get('POPLAB_OUTPUT_DIR') or 'results'

    # Worker processes for experiment sweeps (None = available parallelism)
    WORKERS = None

    @classmethod
    def init_app(cls, app):
        """Initialize application logging."""
        package_logger = logging.getLogger('app')
        package_logger.setLevel(cls.LOG_LEVEL)

        if not any(getattr(h, '_poplab', False) for h in package_logger.handlers):
            handler = logging.StreamHandler()
            handler.setFormatter(logging.Formatter(
                '%(asctime)s %(levelname)s %(name)s: %(message)s'
            ))
            handler._poplab = True
            package_logger.addHandler(handler)


class DeskConfig(Config):
    """Desk-scale configuration (minutes, not days)."""
    PRESET = 'desk'


class PaperConfig(Config):
    """Full protocol: 50 repetitions, hidden sizes 10..100."""
    PRESET = 'paper'


class TestingConfig(Config):
    """Testing configuration."""
    TESTING = True
    PRESET = 'testing'
    LOG_LEVEL = 'WARNING'
    WORKERS = 1


# Configuration dictionary
config = {
    'desk': DeskConfig,
    'paper': PaperConfig,
    'testing': TestingConfig,
    'default': DeskConfig
}
