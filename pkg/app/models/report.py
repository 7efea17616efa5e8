"""
Result containers produced by training and the experiment harness.
"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from app.models.params import ParamVector


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    val_nmse: float = float('nan')


@dataclass
class TrainingResult:
    """Final parameters of a training run plus its per-epoch history."""
    params: ParamVector
    history: List[EpochRecord] = field(default_factory=list)
    best_epoch: Optional[int] = None
    best_val_nmse: float = float('nan')


@dataclass
class AdaptationResult:
    """Outcome of test-time adaptation; loss_history[0] is the pre-adaptation loss."""
    params: ParamVector
    loss_history: List[float]
    best_step: int
    nmse: float = float('nan')


@dataclass
class CellResult:
    """One repetition of one grid cell."""
    problem: int
    method: str
    n_train: int
    n_context: int
    repetition: int
    nmse: float
    nmse_median: float
    status: str
    message: str = ''

    def key(self) -> Tuple[int, str, int, int, int]:
        return (self.problem, self.method, self.n_train, self.n_context, self.repetition)


@dataclass
class ConvergenceRecord:
    problem: int
    method: str
    n_train: int
    repetition: int
    epoch: int
    loss: float
    val_nmse: float


@dataclass
class FitExample:
    problem: int
    method: str
    n_train: int
    n_context: int
    structure: str
    dim: int
    temperature: float
    truth: float
    prediction: float


@dataclass
class ExperimentReport:
    """NMSE results over the (problem, method, n_train, n_context, repetition) grid."""
    cells: List[CellResult] = field(default_factory=list)
    convergence: List[ConvergenceRecord] = field(default_factory=list)
    fit_examples: List[FitExample] = field(default_factory=list)

    def extend(self, other: 'ExperimentReport') -> None:
        self.cells.extend(other.cells)
        self.convergence.extend(other.convergence)
        self.fit_examples.extend(other.fit_examples)

    def values(self, problem: int, method: str, n_train: int, n_context: int) -> np.ndarray:
        """Per-repetition NMSEs of one cell, failed repetitions excluded."""
        return np.array([
            c.nmse for c in self.cells
            if (c.problem, c.method, c.n_train, c.n_context) == (problem, method, n_train, n_context)
            and c.status == 'ok'
        ], dtype=float)

    def summary(self) -> Dict[Tuple[int, str, int, int], Tuple[float, float]]:
        out = {}
        keys = sorted({(c.problem, c.method, c.n_train, c.n_context) for c in self.cells})
        for key in keys:
            vals = self.values(*key)
            out[key] = (float(vals.mean()), float(vals.std())) if vals.size else (float('nan'),) * 2
        return out
