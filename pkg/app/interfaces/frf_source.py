"""
FRF Source Interface - Dependency Inversion Principle
Abstracts how FRF magnitudes are produced for a structure at a temperature
"""
from abc import ABC, abstractmethod

import numpy as np

from app.models import FrfCurve, StructureSpec


class IFrfSource(ABC):
    """
    Abstract interface for FRF generation.
    Implementations can solve the receptance in closed form or estimate it
    from simulated response data.
    """

    @abstractmethod
    def frf(self, spec: StructureSpec, temperature: float, freqs: np.ndarray) -> FrfCurve:
        """
        FRF magnitude of the observed DOF on the given frequency grid.

        Args:
            spec: Population member
            temperature: Environmental temperature [deg C]
            freqs: Frequencies [Hz]

        Returns:
            FrfCurve on exactly `freqs`
        """
        pass
