"""
Reverse-mode differentiation over flat parameter vectors.

Loss functions take a 1-D float64 tensor theta and return a scalar tensor built
from torch primitives; torch's autograd graph is the tape. Second-order terms of
the meta-gradient use forward-over-reverse Hessian-vector products.
"""
import logging
import re
from typing import Callable, List

import torch
from torch.overrides import TorchFunctionMode

from app.models.errors import NonFiniteError

logger = logging.getLogger(__name__)

LossFn = Callable[[torch.Tensor], torch.Tensor]

_ANOMALY_NODE = re.compile(r"Function '(\w+)' returned nan")


class FiniteCheckMode(TorchFunctionMode):
    """Raise NonFiniteError at the first torch primitive whose output is not finite."""

    def __torch_function__(self, func, types, args=(), kwargs=None):
        out = func(*args, **(kwargs or {}))
        if (isinstance(out, torch.Tensor) and out.is_floating_point()
                and not torch.isfinite(out).all()):
            name = getattr(func, '__name__', repr(func))
            raise NonFiniteError(name)
        return out


def _leaf(theta: torch.Tensor) -> torch.Tensor:
    return theta.detach().clone().requires_grad_(True)


def _locate_non_finite(loss_fn: LossFn, theta: torch.Tensor) -> NonFiniteError:
    """Replay the computation with checks switched on to name the failing node."""
    leaf = _leaf(theta)
    try:
        with FiniteCheckMode():
            loss = loss_fn(leaf)
    except NonFiniteError as exc:
        return exc
    try:
        with torch.autograd.detect_anomaly(check_nan=True):
            torch.autograd.grad(loss, leaf)
    except RuntimeError as exc:
        match = _ANOMALY_NODE.search(str(exc))
        return NonFiniteError(match.group(1) if match else 'backward', str(exc))
    return NonFiniteError('loss', "non-finite gradient without a locatable node")


def value_and_grad(loss_fn: LossFn, theta: torch.Tensor):
    """Loss value and its gradient with respect to theta (detached)."""
    leaf = _leaf(theta)
    loss = loss_fn(leaf)
    if loss.dim() != 0:
        raise ValueError("loss function must return a scalar")
    (gradient,) = torch.autograd.grad(loss, leaf)
    if not (torch.isfinite(loss) and torch.isfinite(gradient).all()):
        raise _locate_non_finite(loss_fn, theta)
    return loss.detach(), gradient.detach()


def grad(loss_fn: LossFn, theta: torch.Tensor) -> torch.Tensor:
    """Gradient of loss_fn at theta, laid out like theta."""
    return value_and_grad(loss_fn, theta)[1]


def hvp(loss_fn: LossFn, theta: torch.Tensor, vector: torch.Tensor) -> torch.Tensor:
    """Hessian-vector product H(theta) v by forward-over-reverse."""
    _, tangent = torch.func.jvp(torch.func.grad(loss_fn), (theta.detach(),), (vector.detach(),))
    if not torch.isfinite(tangent).all():
        raise NonFiniteError('hvp')
    return tangent


def inner_update(loss_inner: LossFn, theta: torch.Tensor, alpha: float, k_inner: int) -> List[torch.Tensor]:
    """theta_0 = theta, theta_{j+1} = theta_j - alpha grad L_inner(theta_j); returns all iterates."""
    iterates = [theta.detach()]
    for _ in range(k_inner):
        iterates.append(iterates[-1] - alpha * grad(loss_inner, iterates[-1]))
    return iterates


def grad_through_update(
    loss_outer: LossFn,
    loss_inner: LossFn,
    theta: torch.Tensor,
    alpha: float,
    k_inner: int,
    first_order: bool = False
):
    """
    d L_outer(theta') / d theta with theta' = k_inner inner steps from theta.

    Each inner step has Jacobian I - alpha H(theta_j), so the outer gradient is
    pulled back with v <- v - alpha H(theta_j) v. `first_order` stops the
    gradient at the inner update. Returns (outer loss at theta', meta-gradient).
    """
    if k_inner < 1 or alpha <= 0:
        raise ValueError("need k_inner >= 1 and alpha > 0")
    iterates = inner_update(loss_inner, theta, alpha, k_inner)
    outer_loss, vector = value_and_grad(loss_outer, iterates[-1])
    if first_order:
        return outer_loss, vector
    for point in reversed(iterates[:-1]):
        vector = vector - alpha * hvp(loss_inner, point, vector)
    return outer_loss, vector
