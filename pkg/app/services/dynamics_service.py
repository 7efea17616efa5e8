"""
Dynamics Service - lumped-mass chain assembly, receptance FRFs and RK4 simulation
Single Responsibility: physics of one structure at one temperature
"""
import logging
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from app.interfaces import IFrfSource
from app.models import FrfCurve, StructureSpec, SystemMatrices, TimeHistory
from app.models.errors import (
    DimensionError,
    DivergenceError,
    InvalidPhysicsError,
    NumericalError,
    SingularSystemError,
    StabilityError
)

logger = logging.getLogger(__name__)

STABILITY_LIMIT = 0.5
DIVERGENCE_LIMIT = 1e12
CHUNK_STEPS = 65536


def spring_stiffnesses(spec: StructureSpec, temperature: float) -> np.ndarray:
    """Stiffness of springs 1..n at `temperature`; entry i-1 holds spring i."""
    spec.temp_law.check(temperature)
    values = np.full(spec.n_dof, spec.base_stiffness, dtype=float)
    for spring in sorted(spec.temp_affected_springs):
        values[spring - 1] = spec.temp_law.stiffness(spec.base_stiffness, temperature)
    for index, value in enumerate(values, start=1):
        if not value > 0.0:
            raise InvalidPhysicsError(index, temperature, float(value))
    return values


def chain_matrix(elements: Sequence[float]) -> np.ndarray:
    """
    Tridiagonal chain matrix: element i joins mass i to mass i-1 (mass 1 to ground),
    so K[i,i] = k_i + k_{i+1} (last DOF: k_n) and K[i,i+1] = -k_{i+1}.
    """
    k = np.asarray(elements, dtype=float)
    n = k.size
    matrix = np.diag(k.copy())
    if n > 1:
        matrix[np.arange(n - 1), np.arange(n - 1)] += k[1:]
        matrix[np.arange(n - 1), np.arange(1, n)] = -k[1:]
        matrix[np.arange(1, n), np.arange(n - 1)] = -k[1:]
    return matrix


def assemble_matrices(spec: StructureSpec, temperature: float) -> SystemMatrices:
    """Mass, damping and stiffness matrices of `spec` at `temperature`."""
    stiffness = spring_stiffnesses(spec, temperature)
    mats = SystemMatrices(
        M=np.diag(np.asarray(spec.masses, dtype=float)),
        C=chain_matrix(spec.dampers),
        K=chain_matrix(stiffness)
    )
    try:
        linalg.cholesky(mats.K)
    except linalg.LinAlgError as exc:
        raise NumericalError(f"stiffness matrix not positive definite at T={temperature}") from exc
    return mats


def natural_frequencies(mats: SystemMatrices) -> np.ndarray:
    """Undamped natural frequencies [Hz], ascending."""
    eigenvalues = linalg.eigh(mats.K, mats.M, eigvals_only=True)
    return np.sqrt(np.clip(eigenvalues, 0.0, None)) / (2.0 * np.pi)


def frf_direct(
    mats: SystemMatrices,
    excited_dof: int,
    observed_dof: int,
    freqs
) -> FrfCurve:
    """Receptance |h_obs| from (K - w^2 M + i w C) h = e_excited at each frequency."""
    freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
    n = mats.n_dof
    if freqs.size == 0 or np.any(freqs < 0):
        raise DimensionError("frequencies must be non-empty and non-negative")
    for dof in (excited_dof, observed_dof):
        if not 0 <= dof < n:
            raise DimensionError(f"DOF index {dof} outside 0..{n - 1}")

    omega = 2.0 * np.pi * freqs
    dynamic = (
        mats.K[None, :, :]
        - (omega ** 2)[:, None, None] * mats.M[None, :, :]
        + 1j * omega[:, None, None] * mats.C[None, :, :]
    )
    rhs = np.zeros((freqs.size, n, 1), dtype=complex)
    rhs[:, excited_dof, 0] = 1.0
    try:
        response = np.linalg.solve(dynamic, rhs)[:, :, 0]
    except np.linalg.LinAlgError:
        for f, matrix in zip(freqs, dynamic):
            if np.linalg.matrix_rank(matrix) < n:
                raise SingularSystemError(float(f))
        raise
    magnitude = np.abs(response[:, observed_dof])
    if not np.all(np.isfinite(magnitude)):
        bad = freqs[~np.isfinite(magnitude)][0]
        raise SingularSystemError(float(bad))
    return FrfCurve(freqs=freqs, magnitude=magnitude,
                    observed_dof=observed_dof, excited_dof=excited_dof)


def state_space(mats: SystemMatrices, excited_dof: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """First-order form z' = A z + b u with z = [y, y']."""
    n = mats.n_dof
    m_inv = np.linalg.inv(mats.M)
    A = np.zeros((2 * n, 2 * n))
    A[:n, n:] = np.eye(n)
    A[n:, :n] = -m_inv @ mats.K
    A[n:, n:] = -m_inv @ mats.C
    b = np.zeros(2 * n)
    b[n:] = m_inv[:, excited_dof]
    return A, b


def rk4_propagator(A: np.ndarray, b: np.ndarray, dt: float):
    """
    Classical RK4 on a linear system written as one affine step:
    z+ = Phi z + g0 u(t) + gm u(t + dt/2) + g1 u(t + dt).
    """
    hA = dt * A
    eye = np.eye(A.shape[0])
    hA2 = hA @ hA
    hA3 = hA2 @ hA
    phi = eye + hA + hA2 / 2.0 + hA3 / 6.0 + hA3 @ hA / 24.0
    g0 = dt / 6.0 * (b + hA @ b + hA2 @ b / 2.0 + hA3 @ b / 4.0)
    gm = dt / 6.0 * (4.0 * b + 2.0 * hA @ b + hA2 @ b / 2.0)
    g1 = dt / 6.0 * b
    return phi, g0, gm, g1


def simulate_time_domain(
    mats: SystemMatrices,
    excitation,
    dt: float,
    n_steps: Optional[int] = None,
    excited_dof: int = 0,
    initial_displacement=None,
    initial_velocity=None
) -> TimeHistory:
    """
    RK4 integration of M y'' + C y' + K y = e_excited u(t).

    `excitation` holds u at t = 0, dt, ...; the value at a stage midpoint is the
    mean of the neighbouring samples and the last sample is held.
    """
    if dt <= 0:
        raise DimensionError("dt must be positive")
    u = np.asarray(excitation, dtype=float).reshape(-1)
    n_steps = u.size if n_steps is None else int(n_steps)
    if n_steps < 1 or u.size < n_steps:
        raise DimensionError(f"need {n_steps} excitation samples, got {u.size}")
    omega_max = 2.0 * np.pi * natural_frequencies(mats)[-1]
    if dt * omega_max >= STABILITY_LIMIT:
        raise StabilityError(dt, omega_max, STABILITY_LIMIT)

    n = mats.n_dof
    A, b = state_space(mats, excited_dof)
    phi, g0, gm, g1 = rk4_propagator(A, b, dt)

    u = u[:n_steps]
    u_next = np.append(u[1:], u[-1])
    u_mid = 0.5 * (u + u_next)

    states = np.empty((n_steps + 1, 2 * n))
    z = np.zeros(2 * n)
    if initial_displacement is not None:
        z[:n] = initial_displacement
    if initial_velocity is not None:
        z[n:] = initial_velocity
    states[0] = z

    for start in range(0, n_steps, CHUNK_STEPS):
        stop = min(start + CHUNK_STEPS, n_steps)
        forcing = (np.outer(u[start:stop], g0) + np.outer(u_mid[start:stop], gm)
                   + np.outer(u_next[start:stop], g1))
        for offset, force in enumerate(forcing):
            z = phi @ z + force
            states[start + offset + 1] = z
        block = states[start + 1:stop + 1]
        if not np.all(np.isfinite(block)) or np.abs(block).max() > DIVERGENCE_LIMIT:
            bad = ~np.isfinite(block) | (np.abs(block) > DIVERGENCE_LIMIT)
            raise DivergenceError(start + 1 + int(np.argmax(bad.any(axis=1))))

    logger.debug("RK4 run: %d steps, dt=%g, dt*w_max=%.3g", n_steps, dt, dt * omega_max)
    return TimeHistory(
        time=dt * np.arange(n_steps + 1),
        displacement=states[:, :n],
        velocity=states[:, n:]
    )


def frequency_grid(start: float, stop: float, step: float) -> np.ndarray:
    """Evenly spaced lines start, start+step, ..., stop (inclusive)."""
    count = int(round((stop - start) / step)) + 1
    return start + step * np.arange(count)


class DirectFrfSource(IFrfSource):
    """Closed-form receptance of the assembled matrices."""

    def __init__(self, excited_dof: int = 0, observed_dof: int = 0):
        self._excited_dof = excited_dof
        self._observed_dof = observed_dof

    def frf(self, spec: StructureSpec, temperature: float, freqs: np.ndarray) -> FrfCurve:
        mats = assemble_matrices(spec, temperature)
        return frf_direct(mats, self._excited_dof, self._observed_dof, freqs)
