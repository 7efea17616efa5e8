"""
Per-structure regression datasets.
"""
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numpy as np

from app.models.enums import SplitTag
from app.models.errors import DataError, DimensionError, EmptyContextError, OutOfRangeError


@dataclass(frozen=True)
class TaskDataset:
    """
    Pairs (temperature, target vector) for one structure.

    Rows tagged CONTEXT are kept in draw order so that the first n of them
    form the n-point context set; larger contexts extend smaller ones.
    """
    task_id: str
    temperatures: np.ndarray
    targets: np.ndarray
    splits: np.ndarray
    stiffness: float = float('nan')
    valid_range: Tuple[float, float] = field(default=(20.0, 40.0))

    def __post_init__(self):
        temps = np.asarray(self.temperatures, dtype=float).reshape(-1)
        targets = np.asarray(self.targets, dtype=float)
        if targets.ndim == 1:
            targets = targets[:, None]
        splits = np.asarray(self.splits, dtype=object).reshape(-1)
        if targets.ndim != 2 or targets.shape[0] != temps.size or splits.size != temps.size:
            raise DimensionError(
                f"task {self.task_id}: {temps.size} temperatures, targets {targets.shape}, "
                f"{splits.size} split tags"
            )
        low, high = self.valid_range
        outside = temps[(temps < low) | (temps > high)]
        if outside.size:
            raise OutOfRangeError(f"{self.task_id}.temperature", float(outside[0]), low, high)
        object.__setattr__(self, 'temperatures', temps)
        object.__setattr__(self, 'targets', targets)
        object.__setattr__(self, 'splits', splits)

    @classmethod
    def dense(cls, task_id: str, temperatures, targets, stiffness: float = float('nan')) -> 'TaskDataset':
        """Training-structure dataset: every row is available."""
        temperatures = np.asarray(temperatures, dtype=float)
        splits = np.full(temperatures.size, SplitTag.TRAIN.value, dtype=object)
        return cls(task_id, temperatures, targets, splits, stiffness)

    @property
    def size(self) -> int:
        return self.temperatures.size

    @property
    def output_dim(self) -> int:
        return self.targets.shape[1]

    def rows(self, tag: SplitTag) -> Tuple[np.ndarray, np.ndarray]:
        mask = self.splits == tag.value
        return self.temperatures[mask], self.targets[mask]

    def context(self, n: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
        x, y = self.rows(SplitTag.CONTEXT)
        if n is not None:
            if n > x.size:
                raise DimensionError(f"task {self.task_id} has {x.size} context rows, {n} requested")
            x, y = x[:n], y[:n]
        if x.size == 0:
            raise EmptyContextError(f"task {self.task_id} has no context rows")
        return x, y

    def queries(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.rows(SplitTag.QUERY)

    def all_rows(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.temperatures, self.targets

    def with_targets(self, targets: np.ndarray) -> 'TaskDataset':
        return replace(self, targets=np.asarray(targets, dtype=float))

    def holdout_split(self, n_context: int, seed: int):
        """
        Seeded split of every row into (context_x, context_y), (unseen_x, unseen_y);
        used to score a held-out validation structure.
        """
        if self.size <= n_context + 1:
            raise DataError(f"task {self.task_id} has only {self.size} rows")
        rows = np.random.default_rng(seed).permutation(self.size)
        context, unseen = rows[:n_context], rows[n_context:]
        return ((self.temperatures[context], self.targets[context]),
                (self.temperatures[unseen], self.targets[unseen]))
