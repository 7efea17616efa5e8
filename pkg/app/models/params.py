"""
Flat trainable-parameter storage with a named layout.
"""
from dataclasses import dataclass
from math import prod
from typing import Dict, Iterator, Sequence, Tuple

import torch

from app.models.errors import DimensionError, NonFiniteError

DTYPE = torch.float64


@dataclass(frozen=True)
class ParamLayout:
    """Ordered (name, shape) entries packed back to back into one vector."""
    entries: Tuple[Tuple[str, Tuple[int, ...]], ...]

    @classmethod
    def from_pairs(cls, pairs: Sequence[Tuple[str, Sequence[int]]]) -> 'ParamLayout':
        entries = tuple((name, tuple(int(d) for d in shape)) for name, shape in pairs)
        names = [name for name, _ in entries]
        if len(set(names)) != len(names):
            raise DimensionError(f"duplicate layout names in {names}")
        return cls(entries)

    @property
    def size(self) -> int:
        return sum(prod(shape) for _, shape in self.entries)

    def slices(self) -> Dict[str, slice]:
        out, start = {}, 0
        for name, shape in self.entries:
            stop = start + prod(shape)
            out[name] = slice(start, stop)
            start = stop
        return out

    def unpack(self, flat: torch.Tensor) -> Dict[str, torch.Tensor]:
        """Reshaped views into `flat`; gradients flow back to the flat tensor."""
        if flat.shape != (self.size,):
            raise DimensionError(f"expected flat vector of size {self.size}, got {tuple(flat.shape)}")
        return {
            name: flat[sl].reshape(shape)
            for (name, shape), sl in zip(self.entries, self.slices().values())
        }

    def to_list(self):
        return [[name, list(shape)] for name, shape in self.entries]

    @classmethod
    def from_list(cls, data) -> 'ParamLayout':
        return cls.from_pairs([(name, shape) for name, shape in data])

    def __iter__(self) -> Iterator[Tuple[str, Tuple[int, ...]]]:
        return iter(self.entries)


@dataclass(frozen=True)
class ParamVector:
    """theta: a flat float64 vector plus the layout that names its slices."""
    values: torch.Tensor
    layout: ParamLayout

    def __post_init__(self):
        if self.values.dim() != 1 or self.values.numel() != self.layout.size:
            raise DimensionError(
                f"layout covers {self.layout.size} values, vector has {self.values.numel()}"
            )

    def validate(self) -> 'ParamVector':
        if not torch.isfinite(self.values).all():
            raise NonFiniteError('parameters', "parameter vector contains non-finite values")
        return self

    def named(self) -> Dict[str, torch.Tensor]:
        return self.layout.unpack(self.values)

    def with_values(self, values: torch.Tensor) -> 'ParamVector':
        return ParamVector(values.detach().clone(), self.layout)

    def clone(self) -> 'ParamVector':
        return self.with_values(self.values)
