"""
Interfaces package - Abstract Base Classes for dependency inversion
"""
from .frf_source import IFrfSource
from .regressor import IFewShotRegressor

__all__ = [
    'IFrfSource',
    'IFewShotRegressor'
]
