"""
Functional networks over flat parameter vectors: the tanh MLP and the CNP.
"""
import torch

from app.models import DTYPE, ParamLayout, ParamVector
from app.models.architectures import CnpConfig, MlpConfig
from app.models.errors import DimensionError, EmptyContextError


def mlp_layout(config: MlpConfig) -> ParamLayout:
    h = config.hidden_dim
    return ParamLayout.from_pairs([
        ('l1.weight', (h, config.input_dim)), ('l1.bias', (h,)),
        ('l2.weight', (h, h)), ('l2.bias', (h,)),
        ('l3.weight', (config.output_dim, h)), ('l3.bias', (config.output_dim,)),
    ])


def cnp_layout(config: CnpConfig) -> ParamLayout:
    h, r = config.hidden_dim, config.embedding_dim
    return ParamLayout.from_pairs([
        ('encoder.l1.weight', (h, config.input_dim + config.output_dim)),
        ('encoder.l1.bias', (h,)),
        ('encoder.l2.weight', (r, h)), ('encoder.l2.bias', (r,)),
        ('decoder.l1.weight', (h, config.input_dim + r)),
        ('decoder.l1.bias', (h,)),
        ('decoder.l2.weight', (config.output_dim, h)), ('decoder.l2.bias', (config.output_dim,)),
    ])


def init_params(layout: ParamLayout, seed: int) -> ParamVector:
    """Weights ~ N(0, 1/fan_in), biases zero."""
    generator = torch.Generator().manual_seed(int(seed))
    chunks = []
    for name, shape in layout:
        if name.endswith('weight'):
            fan_in = shape[1]
            chunks.append(torch.randn(shape, generator=generator, dtype=DTYPE).reshape(-1)
                          / fan_in ** 0.5)
        else:
            chunks.append(torch.zeros(shape, dtype=DTYPE).reshape(-1))
    return ParamVector(torch.cat(chunks), layout)


def as_rows(values, width: int, what: str) -> torch.Tensor:
    """float64 tensor of shape (n, width); 1-D input is read as n samples when width is 1."""
    tensor = torch.as_tensor(values, dtype=DTYPE)
    if tensor.dim() == 1:
        tensor = tensor.reshape(-1, 1) if width == 1 else tensor.reshape(1, -1)
    if tensor.dim() != 2 or tensor.shape[1] != width:
        raise DimensionError(f"{what}: expected width {width}, got shape {tuple(tensor.shape)}")
    return tensor


def _dense(x: torch.Tensor, weights, prefix: str) -> torch.Tensor:
    return x @ weights[f'{prefix}.weight'].T + weights[f'{prefix}.bias']


def mlp_apply(theta: torch.Tensor, layout: ParamLayout, x: torch.Tensor) -> torch.Tensor:
    """tanh on every layer, including the output layer."""
    w = layout.unpack(theta)
    hidden = torch.tanh(_dense(x, w, 'l1'))
    hidden = torch.tanh(_dense(hidden, w, 'l2'))
    return torch.tanh(_dense(hidden, w, 'l3'))


def mlp_forward(params: ParamVector, config: MlpConfig, x) -> torch.Tensor:
    """Network output for one input vector (shape (in,)) or a batch (shape (n, in))."""
    tensor = torch.as_tensor(x, dtype=DTYPE)
    single = tensor.dim() == 1 and config.input_dim > 1
    if tensor.dim() == 1 and config.input_dim == 1 and tensor.numel() == 1:
        single = True
    rows = as_rows(tensor, config.input_dim, 'mlp input')
    out = mlp_apply(params.values, params.layout, rows)
    return out[0] if single else out


def aggregate_context(theta: torch.Tensor, layout: ParamLayout,
                      context_x: torch.Tensor, context_y: torch.Tensor) -> torch.Tensor:
    """
    Task embedding: mean encoder output over the distinct context pairs,
    taken in lexicographic order so the result ignores ordering and repeats.
    """
    if context_x.shape[0] == 0:
        raise EmptyContextError("CNP needs at least one context pair")
    pairs = torch.unique(torch.cat([context_x, context_y], dim=1), dim=0)
    w = layout.unpack(theta)
    hidden = torch.tanh(_dense(pairs, w, 'encoder.l1'))
    return _dense(hidden, w, 'encoder.l2').mean(dim=0)


def cnp_apply(theta: torch.Tensor, layout: ParamLayout, context_x: torch.Tensor,
              context_y: torch.Tensor, query_x: torch.Tensor) -> torch.Tensor:
    embedding = aggregate_context(theta, layout, context_x, context_y)
    w = layout.unpack(theta)
    decoder_in = torch.cat([query_x, embedding.expand(query_x.shape[0], -1)], dim=1)
    hidden = torch.tanh(_dense(decoder_in, w, 'decoder.l1'))
    return _dense(hidden, w, 'decoder.l2')


def cnp_predict(params: ParamVector, config: CnpConfig, context_x, context_y, queries) -> torch.Tensor:
    """Predictions (q, output_dim) for the queries, conditioned on the context set."""
    cx = as_rows(context_x, config.input_dim, 'context inputs')
    cy = as_rows(context_y, config.output_dim, 'context targets')
    qx = as_rows(queries, config.input_dim, 'query inputs')
    if cx.shape[0] != cy.shape[0]:
        raise DimensionError(f"{cx.shape[0]} context inputs but {cy.shape[0]} targets")
    if cx.shape[0] == 0:
        raise EmptyContextError("CNP needs at least one context pair")
    return cnp_apply(params.values, params.layout, cx, cy, qx)
