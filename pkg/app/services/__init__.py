"""
Services package - numerical business logic behind the lab commands
"""
from .dynamics_service import DirectFrfSource
from .spectral_service import TimeDomainFrfSource
from .gp_service import GpRegressor
from .maml_service import MamlRegressor
from .cnp_service import CnpRegressor
from .feature_service import AffineScaler, PcaBasis
from .population_service import Population, generate_population
from .experiment_service import run_experiment
from .report_service import emit_report, regenerate_report

__all__ = [
    'DirectFrfSource',
    'TimeDomainFrfSource',
    'GpRegressor',
    'MamlRegressor',
    'CnpRegressor',
    'AffineScaler',
    'PcaBasis',
    'Population',
    'generate_population',
    'run_experiment',
    'emit_report',
    'regenerate_report'
]
