"""
Main application entry point
    python run.py simulate|train|experiment|report [options]
    flask --app run <command> [options]
"""
import os

from flask.cli import FlaskGroup

from app import create_app
from config import config

# Get configuration from environment or use default
config_name = os.environ.get('POPLAB_CONFIG') or 'default'


def make_app():
    return create_app(config[config_name])


app = make_app()

cli = FlaskGroup(create_app=make_app, help="Population-informed few-shot regression lab.")


if __name__ == '__main__':
    cli()
