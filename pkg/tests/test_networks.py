import numpy as np
import pytest
import torch

from app.models import DTYPE, ParamLayout, ParamVector
from app.models.architectures import CnpConfig, MlpConfig
from app.models.errors import DimensionError, EmptyContextError
from app.services.networks import cnp_layout, cnp_predict, init_params, mlp_forward, mlp_layout


def numpy_mlp(theta, config, x):
    """Straight matrix-multiply re-evaluation of the three-layer tanh network."""
    h, i, o = config.hidden_dim, config.input_dim, config.output_dim
    values = theta.numpy()
    sizes = [h * i, h, h * h, h, o * h, o]
    w1, b1, w2, b2, w3, b3 = np.split(values, np.cumsum(sizes)[:-1])
    a = np.tanh(x @ w1.reshape(h, i).T + b1)
    a = np.tanh(a @ w2.reshape(h, h).T + b2)
    return np.tanh(a @ w3.reshape(o, h).T + b3)


@pytest.fixture
def mlp(rng):
    config = MlpConfig(input_dim=1, hidden_dim=6, output_dim=2)
    params = init_params(mlp_layout(config), seed=11)
    noisy = params.with_values(params.values + torch.tensor(rng.normal(size=params.layout.size)))
    return config, noisy


def test_layout_covers_vector_once():
    layout = mlp_layout(MlpConfig(hidden_dim=5))
    slices = list(layout.slices().values())
    assert slices[0].start == 0
    assert all(a.stop == b.start for a, b in zip(slices, slices[1:]))
    assert slices[-1].stop == layout.size == 5 + 5 + 25 + 5 + 5 + 1


def test_duplicate_layout_names_rejected():
    with pytest.raises(DimensionError):
        ParamLayout.from_pairs([('w', (2,)), ('w', (3,))])


def test_param_vector_size_checked():
    layout = mlp_layout(MlpConfig(hidden_dim=3))
    with pytest.raises(DimensionError):
        ParamVector(torch.zeros(layout.size + 1, dtype=DTYPE), layout)


def test_initial_biases_are_zero():
    params = init_params(mlp_layout(MlpConfig(hidden_dim=4)), seed=0)
    for name, value in params.named().items():
        if name.endswith('bias'):
            assert not torch.any(value)


def test_initialisation_is_seeded():
    layout = mlp_layout(MlpConfig(hidden_dim=4))
    assert torch.equal(init_params(layout, 3).values, init_params(layout, 3).values)
    assert not torch.equal(init_params(layout, 3).values, init_params(layout, 4).values)


def test_zero_parameters_give_zero_output():
    config = MlpConfig(hidden_dim=4)
    params = ParamVector(torch.zeros(mlp_layout(config).size, dtype=DTYPE), mlp_layout(config))
    assert not torch.any(mlp_forward(params, config, np.linspace(-1, 1, 7)))


def test_mlp_matches_matrix_multiply_oracle(mlp, rng):
    config, params = mlp
    x = rng.uniform(-2, 2, size=(30, 1))
    out = mlp_forward(params, config, x).numpy()
    np.testing.assert_allclose(out, numpy_mlp(params.values, config, x), rtol=0, atol=1e-12)


def test_single_input_returns_one_row(mlp):
    config, params = mlp
    assert tuple(mlp_forward(params, config, [0.5]).shape) == (2,)


def test_mlp_output_bounded_by_last_layer(mlp, rng):
    config, params = mlp
    named = params.named()
    bound = named['l3.weight'].abs().sum(dim=1) + named['l3.bias'].abs()
    out = mlp_forward(params, config, rng.uniform(-50, 50, size=(200, 1)))
    assert torch.all(out.abs() <= bound)
    assert torch.all(out.abs() <= 1.0)


# CNP ---------------------------------------------------------------------------------

@pytest.fixture
def cnp():
    config = CnpConfig(embedding_dim=8, hidden_dim=16)
    return config, init_params(cnp_layout(config), seed=5)


def test_cnp_prediction_ignores_context_order(cnp, rng):
    config, params = cnp
    cx = rng.uniform(-1, 1, size=6)
    cy = rng.uniform(-1, 1, size=(6, 1))
    queries = np.linspace(-1, 1, 11)
    order = rng.permutation(6)
    first = cnp_predict(params, config, cx, cy, queries)
    second = cnp_predict(params, config, cx[order], cy[order], queries)
    assert torch.equal(first, second)


def test_cnp_prediction_ignores_duplicates(cnp):
    config, params = cnp
    queries = np.linspace(-1, 1, 11)
    single = cnp_predict(params, config, [0.3], [[0.7]], queries)
    repeated = cnp_predict(params, config, [0.3] * 5, [[0.7]] * 5, queries)
    assert torch.equal(single, repeated)


def test_cnp_rejects_empty_context(cnp):
    config, params = cnp
    with pytest.raises(EmptyContextError):
        cnp_predict(params, config, np.empty(0), np.empty((0, 1)), [0.0])


def test_cnp_rejects_mismatched_context(cnp):
    config, params = cnp
    with pytest.raises(DimensionError):
        cnp_predict(params, config, [0.1, 0.2], [[0.3]], [0.0])
