"""
Blueprints package - lab commands and the read-only reports viewer
"""
from .commands import lab_bp
from .reports import reports_bp

__all__ = [
    'lab_bp',
    'reports_bp'
]
