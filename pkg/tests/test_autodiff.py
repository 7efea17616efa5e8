import numpy as np
import pytest
import torch

from app.models import DTYPE
from app.models.architectures import MlpConfig
from app.models.errors import NonFiniteError
from app.services.autodiff import grad, grad_through_update, hvp, value_and_grad
from app.services.networks import init_params, mlp_apply, mlp_layout
from tests.oracles import fd_gradient


def tensor(values):
    return torch.tensor(values, dtype=DTYPE)


@pytest.fixture
def mlp_problem(rng):
    """A random 3-layer tanh MLP with a random regression batch."""
    config = MlpConfig(hidden_dim=8)
    layout = mlp_layout(config)
    theta = init_params(layout, seed=7).values + 0.1 * tensor(rng.normal(size=layout.size))
    x = tensor(rng.uniform(-1.5, 1.5, size=(12, 1)))
    y = tensor(rng.uniform(-0.9, 0.9, size=(12, 1)))
    x2 = tensor(rng.uniform(-1.5, 1.5, size=(12, 1)))
    y2 = tensor(rng.uniform(-0.9, 0.9, size=(12, 1)))

    def loss(data_x, data_y):
        return lambda t: torch.mean((mlp_apply(t, layout, data_x) - data_y) ** 2)

    return theta, loss(x, y), loss(x2, y2)


def as_numpy_fn(loss_fn):
    return lambda values: float(loss_fn(tensor(values)))


def random_problem(seed):
    """A random 3-layer tanh MLP of random width with two random regression batches."""
    rng = np.random.default_rng(seed)
    config = MlpConfig(hidden_dim=int(rng.integers(2, 9)))
    layout = mlp_layout(config)
    theta = init_params(layout, seed=seed).values + 0.1 * tensor(rng.normal(size=layout.size))

    def batch():
        n = int(rng.integers(3, 13))
        x = tensor(rng.uniform(-1.5, 1.5, size=(n, 1)))
        y = tensor(rng.uniform(-0.9, 0.9, size=(n, 1)))
        return lambda t: torch.mean((mlp_apply(t, layout, x) - y) ** 2)

    return theta, batch(), batch()


def relative_error(actual, expected):
    return np.abs(actual - expected).max() / np.abs(expected).max()


TRIALS = range(100)


def test_quadratic_gradient():
    g = grad(lambda t: torch.sum(t ** 2), tensor([1.0, -2.0]))
    np.testing.assert_array_equal(g.numpy(), [2.0, -4.0])


def test_tanh_slope_at_zero():
    g = grad(lambda t: torch.tanh(t[0]), tensor([0.0]))
    assert g.item() == 1.0


def test_value_and_grad_returns_loss():
    value, g = value_and_grad(lambda t: torch.sum(t ** 2), tensor([3.0]))
    assert value.item() == 9.0
    assert g.item() == 6.0


def test_mlp_gradient_matches_finite_differences(mlp_problem, rng):
    theta, loss, _ = mlp_problem
    coordinates = rng.choice(theta.numel(), size=min(100, theta.numel()), replace=False)
    expected = fd_gradient(as_numpy_fn(loss), theta.numpy(), 1e-5, coordinates)
    actual = grad(loss, theta).numpy()
    error = np.abs(actual[coordinates] - expected[coordinates]).max()
    assert error / np.abs(expected[coordinates]).max() < 1e-6


@pytest.mark.parametrize('trial', TRIALS)
def test_random_network_gradients_match_finite_differences(trial):
    theta, loss, _ = random_problem(trial)
    expected = fd_gradient(as_numpy_fn(loss), theta.numpy(), 1e-5)
    assert relative_error(grad(loss, theta).numpy(), expected) < 1e-6


def test_gradient_is_linear_in_the_loss(rng):
    theta, f, g = random_problem(11)
    a, b = (float(v) for v in rng.normal(size=2))
    combined = grad(lambda t: a * f(t) + b * g(t), theta)
    separate = a * grad(f, theta) + b * grad(g, theta)
    np.testing.assert_allclose(combined.numpy(), separate.numpy(), rtol=1e-12, atol=1e-12)


def test_gradient_is_deterministic(mlp_problem):
    theta, loss, _ = mlp_problem
    assert torch.equal(grad(loss, theta), grad(loss, theta))


def test_non_finite_value_names_the_primitive():
    with pytest.raises(NonFiniteError) as excinfo:
        value_and_grad(lambda t: torch.sum(torch.log(t)), tensor([-1.0, 2.0]))
    assert excinfo.value.node == 'log'


# Second order ---------------------------------------------------------------------------

def test_hvp_of_quadratic_is_matrix_product():
    A = tensor([[2.0, 1.0], [1.0, 3.0]])
    v = tensor([1.0, -1.0])
    out = hvp(lambda t: 0.5 * t @ A @ t, tensor([0.3, 0.4]), v)
    np.testing.assert_allclose(out.numpy(), (A @ v).numpy(), rtol=1e-14)


def test_hvp_is_linear(mlp_problem, rng):
    theta, loss, _ = mlp_problem
    u = tensor(rng.normal(size=theta.numel()))
    v = tensor(rng.normal(size=theta.numel()))
    combined = hvp(loss, theta, 2.0 * u - 3.0 * v)
    separate = 2.0 * hvp(loss, theta, u) - 3.0 * hvp(loss, theta, v)
    np.testing.assert_allclose(combined.numpy(), separate.numpy(), rtol=1e-9, atol=1e-12)


def test_through_update_closed_form():
    theta = tensor([1.0, -2.0, 3.0])
    alpha = 0.1
    half_norm = lambda t: 0.5 * torch.sum(t ** 2)  # noqa: E731
    _, meta = grad_through_update(half_norm, half_norm, theta, alpha, 1)
    np.testing.assert_allclose(meta.numpy(), ((1 - alpha) ** 2 * theta).numpy(), rtol=1e-14)


def test_constant_inner_loss_reduces_to_plain_gradient(mlp_problem):
    theta, _, outer = mlp_problem
    _, meta = grad_through_update(outer, lambda t: torch.sum(t * 0.0) + 1.0, theta, 0.01, 1)
    assert torch.allclose(meta, grad(outer, theta), rtol=0, atol=0)


def test_first_order_drops_the_hessian_term(mlp_problem):
    theta, inner, outer = mlp_problem
    alpha = 0.05
    _, meta = grad_through_update(outer, inner, theta, alpha, 1, first_order=True)
    adapted = theta - alpha * grad(inner, theta)
    assert torch.equal(meta, grad(outer, adapted))


@pytest.mark.parametrize('k_inner', [1, 2])
def test_meta_gradient_matches_composed_finite_differences(mlp_problem, rng, k_inner):
    theta, inner, outer = mlp_problem
    alpha = 0.05

    def composed(values):
        point = tensor(values)
        for _ in range(k_inner):
            point = point - alpha * grad(inner, point)
        return float(outer(point))

    coordinates = rng.choice(theta.numel(), size=25, replace=False)
    expected = fd_gradient(composed, theta.numpy(), 1e-5, coordinates)
    _, meta = grad_through_update(outer, inner, theta, alpha, k_inner)
    error = np.abs(meta.numpy()[coordinates] - expected[coordinates]).max()
    assert error / np.abs(expected[coordinates]).max() < 1e-4


@pytest.mark.parametrize('trial', TRIALS)
def test_random_meta_gradients_match_composed_finite_differences(trial):
    theta, inner, outer = random_problem(1000 + trial)
    settings = np.random.default_rng(trial)
    alpha = float(settings.uniform(0.01, 0.1))
    k_inner = int(settings.integers(1, 3))

    def composed(values):
        point = tensor(values)
        for _ in range(k_inner):
            point = point - alpha * grad(inner, point)
        return float(outer(point))

    expected = fd_gradient(composed, theta.numpy(), 1e-5)
    _, meta = grad_through_update(outer, inner, theta, alpha, k_inner)
    assert relative_error(meta.numpy(), expected) < 1e-4


def test_through_update_rejects_bad_step():
    with pytest.raises(ValueError):
        grad_through_update(torch.sum, torch.sum, tensor([1.0]), 0.0, 1)
