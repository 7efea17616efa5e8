"""
Spectral Service - H1 FRF estimation from response data and spectral-line lookup
"""
import logging
from typing import Sequence

import numpy as np
from scipy import signal

from app.interfaces import IFrfSource
from app.models import FrfCurve, StructureSpec
from app.models.errors import DataError, DimensionError, OutOfRangeError
from app.services.dynamics_service import (
    assemble_matrices,
    simulate_time_domain
)

logger = logging.getLogger(__name__)


def segment_length(n_samples: int, n_segments: int, overlap: float) -> int:
    """Segment length that splits `n_samples` into `n_segments` overlapped windows."""
    return int(n_samples / (1.0 + (n_segments - 1) * (1.0 - overlap)))


def estimate_frf_h1(
    input_signal,
    output_signal,
    dt: float,
    n_segments: int = 128,
    overlap: float = 0.5,
    window: str = 'hann',
    excited_dof: int = 0,
    observed_dof: int = 0
) -> FrfCurve:
    """
    Welch-averaged H1 = S_xy / S_xx on the FFT grid of one segment.

    Lines where S_xx or S_xy vanish are dropped and listed in `excluded_freqs`.
    """
    x = np.asarray(input_signal, dtype=float).reshape(-1)
    y = np.asarray(output_signal, dtype=float).reshape(-1)
    if x.size != y.size:
        raise DimensionError(f"input has {x.size} samples, output has {y.size}")
    nperseg = segment_length(x.size, n_segments, overlap)
    if n_segments < 2 or nperseg < 2:
        raise DataError(f"{x.size} samples cannot form {n_segments} segments")
    noverlap = int(nperseg * overlap)
    fs = 1.0 / dt

    freqs, s_xy = signal.csd(x, y, fs=fs, window=window, nperseg=nperseg,
                             noverlap=noverlap, detrend=False)
    _, s_xx = signal.welch(x, fs=fs, window=window, nperseg=nperseg,
                           noverlap=noverlap, detrend=False)

    keep = (s_xx > 0) & (np.abs(s_xy) > 0)
    if not np.all(keep):
        logger.warning("H1: %d spectral lines with zero auto/cross spectrum excluded",
                       int((~keep).sum()))
    h1 = s_xy[keep] / s_xx[keep]
    return FrfCurve(
        freqs=freqs[keep],
        magnitude=np.abs(h1),
        observed_dof=observed_dof,
        excited_dof=excited_dof,
        excluded_freqs=tuple(float(f) for f in freqs[~keep])
    )


def spectral_line(curve: FrfCurve, f_target: float) -> float:
    """Magnitude at the grid line nearest `f_target`; ties go to the lower line."""
    freqs = curve.freqs
    if not freqs[0] <= f_target <= freqs[-1]:
        raise OutOfRangeError('f_target', f_target, float(freqs[0]), float(freqs[-1]))
    upper = int(np.searchsorted(freqs, f_target))
    if upper == 0:
        return float(curve.magnitude[0])
    lower = upper - 1
    if upper < freqs.size and (freqs[upper] - f_target) < (f_target - freqs[lower]):
        return float(curve.magnitude[upper])
    return float(curve.magnitude[lower])


def resample(curve: FrfCurve, freqs) -> FrfCurve:
    """Nearest-line lookup of `curve` on another grid."""
    freqs = np.asarray(freqs, dtype=float)
    values = np.array([spectral_line(curve, f) for f in freqs])
    return FrfCurve(freqs=freqs, magnitude=values,
                    observed_dof=curve.observed_dof, excited_dof=curve.excited_dof)


class TimeDomainFrfSource(IFrfSource):
    """
    White-noise excitation at the excited DOF, RK4 response, H1 estimate.
    Each call draws its noise from a generator seeded by (seed, structure, temperature).
    """

    def __init__(
        self,
        dt: float = 1e-3,
        n_steps: int = 2 ** 20,
        noise_std: float = 1.0,
        n_segments: int = 128,
        overlap: float = 0.5,
        window: str = 'hann',
        excited_dof: int = 0,
        observed_dof: int = 0,
        seed: int = 0
    ):
        self._dt = dt
        self._n_steps = n_steps
        self._noise_std = noise_std
        self._n_segments = n_segments
        self._overlap = overlap
        self._window = window
        self._excited_dof = excited_dof
        self._observed_dof = observed_dof
        self._seed = seed

    def frf(self, spec: StructureSpec, temperature: float, freqs: np.ndarray) -> FrfCurve:
        mats = assemble_matrices(spec, temperature)
        key = [self._seed, int(round(spec.base_stiffness * 1000)), int(round(temperature * 1e6))]
        rng = np.random.default_rng(np.random.SeedSequence(key))
        force = rng.normal(0.0, self._noise_std, self._n_steps)
        history = simulate_time_domain(mats, force, self._dt, excited_dof=self._excited_dof)
        response = history.displacement[:-1, self._observed_dof]
        estimate = estimate_frf_h1(
            force, response, self._dt,
            n_segments=self._n_segments, overlap=self._overlap, window=self._window,
            excited_dof=self._excited_dof, observed_dof=self._observed_dof
        )
        return resample(estimate, freqs)


def spectral_line_sweep(
    source: IFrfSource,
    structures: Sequence[StructureSpec],
    temperatures,
    f_target: float
) -> np.ndarray:
    """Line magnitude for every (structure, temperature); shape (n_structures, n_temps)."""
    temperatures = np.asarray(temperatures, dtype=float)
    grid = np.array([f_target])
    return np.array([
        [source.frf(spec, t, grid).magnitude[0] for t in temperatures]
        for spec in structures
    ])
