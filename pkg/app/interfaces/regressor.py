"""
Few-Shot Regressor Interface - Open/Closed Principle
New population-informed learners can be compared by implementing this interface
"""
from abc import ABC, abstractmethod
from typing import List, Optional

import numpy as np

from app.models import EpochRecord, TaskDataset


class IFewShotRegressor(ABC):
    """
    Abstract interface for regressors evaluated on a testing population.
    Inputs and targets are already standardized.
    """

    @abstractmethod
    def fit_population(
        self,
        train_tasks: List[TaskDataset],
        validation_task: Optional[TaskDataset]
    ) -> None:
        """
        Learn from the data-rich training structures.

        Args:
            train_tasks: Training-population datasets
            validation_task: Held-out structure for model selection (may be None)
        """
        pass

    @abstractmethod
    def predict(
        self,
        context_x: np.ndarray,
        context_y: np.ndarray,
        query_x: np.ndarray
    ) -> np.ndarray:
        """
        Predict targets for a new structure from its few context samples.

        Args:
            context_x: Context temperatures, shape (n,)
            context_y: Context targets, shape (n, d)
            query_x: Query temperatures, shape (q,)

        Returns:
            Predictions of shape (q, d)
        """
        pass

    @abstractmethod
    def history(self) -> List[EpochRecord]:
        """
        Training history of the selected model (empty for non-trained learners).

        Returns:
            List of per-epoch records
        """
        pass
