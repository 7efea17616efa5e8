"""
Models package
"""
from .enums import (
    Problem,
    Method,
    TemperatureMode,
    FrfMethod,
    MetaOptimizer,
    SplitTag,
    CellStatus,
    ExitCode
)
from .structures import TemperatureLaw, StructureSpec, SystemMatrices, FrfCurve, TimeHistory
from .params import ParamLayout, ParamVector, DTYPE
from .datasets import TaskDataset
from .report import (
    EpochRecord,
    TrainingResult,
    AdaptationResult,
    CellResult,
    ConvergenceRecord,
    FitExample,
    ExperimentReport
)

__all__ = [
    'Problem',
    'Method',
    'TemperatureMode',
    'FrfMethod',
    'MetaOptimizer',
    'SplitTag',
    'CellStatus',
    'ExitCode',
    'TemperatureLaw',
    'StructureSpec',
    'SystemMatrices',
    'FrfCurve',
    'TimeHistory',
    'ParamLayout',
    'ParamVector',
    'DTYPE',
    'TaskDataset',
    'EpochRecord',
    'TrainingResult',
    'AdaptationResult',
    'CellResult',
    'ConvergenceRecord',
    'FitExample',
    'ExperimentReport'
]
