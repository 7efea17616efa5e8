"""
Network architecture descriptions.
"""
from dataclasses import asdict, dataclass

from app.models.errors import ConfigError


@dataclass(frozen=True)
class MlpConfig:
    """Three tanh layers: input -> hidden -> hidden -> output."""
    input_dim: int = 1
    hidden_dim: int = 40
    output_dim: int = 1

    def __post_init__(self):
        for name in ('input_dim', 'hidden_dim', 'output_dim'):
            if getattr(self, name) < 1:
                raise ConfigError("must be >= 1", field=f'mlp.{name}')

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class CnpConfig:
    """
    Encoder (x, y) -> hidden -> r, mean aggregation over the context,
    decoder (x, r) -> hidden -> y. One tanh hidden layer on each side.
    """
    input_dim: int = 1
    output_dim: int = 1
    embedding_dim: int = 32
    hidden_dim: int = 64

    def __post_init__(self):
        for name in ('input_dim', 'output_dim', 'embedding_dim', 'hidden_dim'):
            if getattr(self, name) < 1:
                raise ConfigError("must be >= 1", field=f'cnp.{name}')

    def to_dict(self):
        return asdict(self)
