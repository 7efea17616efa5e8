"""
Structural data model: lumped-mass chains, temperature laws, system matrices, FRFs.
"""
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from app.models.enums import TemperatureMode
from app.models.errors import ConfigError, OutOfRangeError


@dataclass(frozen=True)
class TemperatureLaw:
    """
    Quadratic stiffness law q(T) = a2*T^2 + a1*T + a0 [N/m].

    In SCALED mode an affected spring takes k_struct * q(T) / q(T_ref);
    in ABSOLUTE mode it takes q(T) regardless of the structure.
    """
    coefficients: Tuple[float, float, float] = (-13.0, 500.0, 7200.0)
    mode: TemperatureMode = TemperatureMode.SCALED
    valid_range: Tuple[float, float] = (20.0, 40.0)
    reference_temperature: float = 20.0

    def __post_init__(self):
        low, high = self.valid_range
        if not low < high:
            raise ConfigError("valid range must be increasing", field='dynamics.temperature_range')

    def minimum_over_range(self) -> float:
        """Smallest value of q on the valid range."""
        low, high = self.valid_range
        # q is quadratic: the minimum sits at an end point or at the vertex
        candidates = [low, high]
        a2, a1, _ = self.coefficients
        if a2 != 0.0:
            vertex = -a1 / (2.0 * a2)
            if low < vertex < high:
                candidates.append(vertex)
        return min(self.q(t) for t in candidates)

    def q(self, temperature: float) -> float:
        a2, a1, a0 = self.coefficients
        return a2 * temperature * temperature + a1 * temperature + a0

    def check(self, temperature: float, name: str = 'temperature') -> None:
        low, high = self.valid_range
        if not low <= temperature <= high:
            raise OutOfRangeError(name, temperature, low, high)

    def stiffness(self, base_stiffness: float, temperature: float) -> float:
        """Stiffness of an affected spring at the given temperature."""
        if self.mode is TemperatureMode.ABSOLUTE:
            return self.q(temperature)
        return base_stiffness * self.q(temperature) / self.q(self.reference_temperature)


@dataclass(frozen=True)
class StructureSpec:
    """
    One population member.

    Spring and damper numbers are 1-based: spring 1 ties mass 1 to ground,
    spring i ties mass i to mass i-1.
    """
    n_dof: int
    masses: Tuple[float, ...]
    dampers: Tuple[float, ...]
    base_stiffness: float
    temp_affected_springs: frozenset = frozenset({1, 2, 3})
    temp_law: TemperatureLaw = field(default_factory=TemperatureLaw)
    structure_id: str = ''

    def __post_init__(self):
        if self.n_dof < 1:
            raise ConfigError("n_dof must be >= 1", field='dynamics.n_dof')
        if len(self.masses) != self.n_dof or len(self.dampers) != self.n_dof:
            raise ConfigError("one mass and one damper per DOF required", field='dynamics.masses')
        if any(m <= 0 for m in self.masses):
            raise ConfigError("masses must be positive", field='dynamics.mass')
        if any(c < 0 for c in self.dampers):
            raise ConfigError("dampers must be non-negative", field='dynamics.damper')
        if self.base_stiffness <= 0:
            raise ConfigError("stiffness must be positive", field='dynamics.base_stiffness')
        if not set(self.temp_affected_springs) <= set(range(1, self.n_dof + 1)):
            raise ConfigError(
                f"affected springs must lie in 1..{self.n_dof}",
                field='dynamics.temp_affected_springs'
            )

    @classmethod
    def chain(
        cls,
        base_stiffness: float,
        n_dof: int = 5,
        mass: float = 1.0,
        damper: float = 2.0,
        temp_affected_springs=(1, 2, 3),
        temp_law: Optional[TemperatureLaw] = None,
        structure_id: str = ''
    ) -> 'StructureSpec':
        """Uniform chain with identical masses and dampers."""
        affected = frozenset(s for s in temp_affected_springs if s <= n_dof)
        return cls(
            n_dof=n_dof,
            masses=(float(mass),) * n_dof,
            dampers=(float(damper),) * n_dof,
            base_stiffness=float(base_stiffness),
            temp_affected_springs=affected,
            temp_law=temp_law or TemperatureLaw(),
            structure_id=structure_id
        )


@dataclass(frozen=True)
class SystemMatrices:
    """Mass [kg], damping [N s/m] and stiffness [N/m] matrices."""
    M: np.ndarray
    C: np.ndarray
    K: np.ndarray

    @property
    def n_dof(self) -> int:
        return self.M.shape[0]


@dataclass(frozen=True)
class FrfCurve:
    """Receptance magnitude |H(f)| [m/N] of observed_dof for a force at excited_dof."""
    freqs: np.ndarray
    magnitude: np.ndarray
    observed_dof: int = 0
    excited_dof: int = 0
    excluded_freqs: Tuple[float, ...] = ()


@dataclass(frozen=True)
class TimeHistory:
    """State history of a time-domain run; rows are time samples."""
    time: np.ndarray
    displacement: np.ndarray
    velocity: np.ndarray
