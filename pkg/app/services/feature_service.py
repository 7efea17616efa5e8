"""
Feature Service - standardization transforms and PCA compression of FRF targets
Single Responsibility: maps raw temperatures/targets to the learners' scaled space and back
"""
import logging
from dataclasses import dataclass
from typing import Any, Dict

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.decomposition import PCA
from sklearn.preprocessing import MinMaxScaler, StandardScaler

from app.models.errors import DataError, DimensionError, RankError

logger = logging.getLogger(__name__)


class AffineScaler(BaseEstimator, TransformerMixin):
    """
    Column-wise x -> (x - shift) / scale.

    kind='standard' fits zero mean / unit variance (temperatures);
    kind='range' maps the fitted min/max onto [-target_range, target_range]
    so that a tanh output head can reach every training target.
    """

    def __init__(self, kind: str = 'standard', target_range: float = 0.9):
        self.kind = kind
        self.target_range = target_range

    def _estimator(self):
        if self.kind == 'standard':
            return StandardScaler()
        if self.kind == 'range':
            return MinMaxScaler(feature_range=(-self.target_range, self.target_range))
        raise ValueError(f"Scaler kind '{self.kind}' not found. Available kinds: ['standard', 'range']")

    def fit(self, X, y=None):
        data = _as_2d(X)
        if data.shape[0] == 0:
            raise DataError("cannot fit a scaler on zero rows")
        estimator = self._estimator().fit(data)
        if self.kind == 'standard':
            self.shift_ = estimator.mean_.astype(float)
            self.scale_ = estimator.scale_.astype(float)
        else:
            self.scale_ = 1.0 / estimator.scale_.astype(float)
            self.shift_ = -estimator.min_.astype(float) * self.scale_
        return self

    def transform(self, X):
        data = np.asarray(X, dtype=float)
        out = (_as_2d(data) - self.shift_) / self.scale_
        return out.reshape(data.shape)

    def inverse_transform(self, X):
        data = np.asarray(X, dtype=float)
        out = _as_2d(data) * self.scale_ + self.shift_
        return out.reshape(data.shape)

    @property
    def shift(self) -> np.ndarray:
        return self.shift_

    @property
    def scale(self) -> np.ndarray:
        return self.scale_

    def to_dict(self) -> Dict[str, Any]:
        return {
            'kind': self.kind,
            'target_range': self.target_range,
            'shift': [float(v).hex() for v in self.shift_],
            'scale': [float(v).hex() for v in self.scale_],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'AffineScaler':
        scaler = cls(kind=data['kind'], target_range=data['target_range'])
        scaler.shift_ = np.array([float.fromhex(v) for v in data['shift']])
        scaler.scale_ = np.array([float.fromhex(v) for v in data['scale']])
        return scaler


def _as_2d(values) -> np.ndarray:
    data = np.asarray(values, dtype=float)
    if data.ndim == 1:
        return data.reshape(-1, 1)
    if data.ndim != 2:
        raise DimensionError(f"expected 1-D or 2-D data, got shape {data.shape}")
    return data


@dataclass(frozen=True)
class PcaBasis:
    """Mean, orthonormal components (d x r) and explained-variance fractions."""
    mean: np.ndarray
    components: np.ndarray
    explained_variance_ratio: np.ndarray
    rank: int

    @property
    def n_components(self) -> int:
        return self.components.shape[1]

    @property
    def dim(self) -> int:
        return self.components.shape[0]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'mean': [float(v).hex() for v in self.mean],
            'components': [[float(v).hex() for v in row] for row in self.components],
            'explained_variance_ratio': [float(v).hex() for v in self.explained_variance_ratio],
            'rank': self.rank,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'PcaBasis':
        return cls(
            mean=np.array([float.fromhex(v) for v in data['mean']]),
            components=np.array([[float.fromhex(v) for v in row] for row in data['components']]),
            explained_variance_ratio=np.array(
                [float.fromhex(v) for v in data['explained_variance_ratio']]
            ),
            rank=int(data['rank'])
        )


def _full_pca(samples: np.ndarray):
    data = np.asarray(samples, dtype=float)
    if data.ndim != 2 or data.shape[0] < 2:
        raise DataError(f"PCA needs a matrix with at least two rows, got shape {data.shape}")
    pca = PCA(n_components=None, svd_solver='full').fit(data)
    singular = pca.singular_values_
    tol = singular[0] * max(data.shape) * np.finfo(float).eps if singular.size else 0.0
    rank = int(np.sum(singular > tol)) if singular.size and singular[0] > 0 else 0
    return pca, rank


def pca_fit(samples, r: int) -> PcaBasis:
    """
    Principal components of the training FRFs.

    Each component is flipped so that its largest-magnitude entry is positive,
    which makes repeated fits on the same data identical.
    """
    pca, rank = _full_pca(samples)
    if r < 1 or r > rank:
        raise RankError(r, rank)
    components = pca.components_[:r].T.copy()
    for j in range(r):
        pivot = int(np.argmax(np.abs(components[:, j])))
        if components[pivot, j] < 0:
            components[:, j] = -components[:, j]
    return PcaBasis(
        mean=pca.mean_.copy(),
        components=components,
        explained_variance_ratio=pca.explained_variance_ratio_[:r].copy(),
        rank=rank
    )


def choose_components(samples, threshold: float = 0.999, cap: int = 10) -> int:
    """Smallest r whose cumulative explained variance reaches `threshold`, capped."""
    pca, rank = _full_pca(samples)
    if rank == 0:
        raise RankError(1, 0)
    cumulative = np.cumsum(pca.explained_variance_ratio_)
    r = int(np.searchsorted(cumulative, threshold - 1e-12) + 1)
    r = min(r, cap, rank)
    logger.info("PCA: %d components explain %.5f of the variance", r, cumulative[r - 1])
    return r


def pca_transform(basis: PcaBasis, vectors) -> np.ndarray:
    x = np.asarray(vectors, dtype=float)
    if x.shape[-1] != basis.dim:
        raise DimensionError(f"expected vectors of length {basis.dim}, got {x.shape[-1]}")
    return (x - basis.mean) @ basis.components


def pca_inverse(basis: PcaBasis, coordinates) -> np.ndarray:
    z = np.asarray(coordinates, dtype=float)
    if z.shape[-1] != basis.n_components:
        raise DimensionError(
            f"expected {basis.n_components} coordinates, got {z.shape[-1]}"
        )
    return z @ basis.components.T + basis.mean
