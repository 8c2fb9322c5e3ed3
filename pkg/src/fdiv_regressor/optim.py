"""Parameter update rules: Adadelta and plain gradient descent."""

import logging
from dataclasses import dataclass, field

import numpy as np

from .config import settings
from .errors import ContractViolation
from .models import OptimizerKind
from .network import ParameterSet
from .numerics import Tensor

logger = logging.getLogger(__name__)


def _check_grads(params: ParameterSet, grads: dict[str, Tensor]) -> None:
    for name, grad in grads.items():
        if name not in params.values:
            raise ContractViolation(f"gradient for unknown parameter '{name}'")
        if grad.shape != params.values[name].shape:
            raise ContractViolation(
                f"gradient shape {grad.shape} does not match parameter '{name}' {params.values[name].shape}"
            )


@dataclass
class AdadeltaState:
    """Running averages of squared gradients and squared updates per parameter."""

    sq_grad: dict[str, Tensor] = field(default_factory=dict)
    sq_delta: dict[str, Tensor] = field(default_factory=dict)
    rho: float = 0.95
    epsilon: float = 1e-6

    @classmethod
    def for_params(
        cls,
        params: ParameterSet,
        rho: float | None = None,
        epsilon: float | None = None,
    ) -> "AdadeltaState":
        return cls(
            sq_grad={k: np.zeros_like(v) for k, v in params.values.items()},
            sq_delta={k: np.zeros_like(v) for k, v in params.values.items()},
            rho=settings.adadelta_rho if rho is None else rho,
            epsilon=settings.adadelta_epsilon if epsilon is None else epsilon,
        )


def adadelta_step(
    params: ParameterSet,
    grads: dict[str, Tensor],
    state: AdadeltaState,
    r: float = 1.0,
) -> None:
    """
    Apply one Adadelta update in place.

    Args:
        params: Parameters to update
        grads: Gradient per parameter; missing names are left untouched
        state: Accumulators, updated in place
        r: Multiplier applied to the computed update
    """
    _check_grads(params, grads)
    rho, eps = state.rho, state.epsilon
    for name, grad in grads.items():
        if name not in state.sq_grad:
            raise ContractViolation(f"optimizer state has no accumulator for '{name}'")
        sq_grad = rho * state.sq_grad[name] + (1.0 - rho) * grad**2
        delta = -np.sqrt(state.sq_delta[name] + eps) / np.sqrt(sq_grad + eps) * grad
        state.sq_delta[name] = rho * state.sq_delta[name] + (1.0 - rho) * delta**2
        state.sq_grad[name] = sq_grad
        params.values[name] = params.values[name] + r * delta


def sgd_step(params: ParameterSet, grads: dict[str, Tensor], lr: float) -> None:
    """Apply theta <- theta - lr * g in place."""
    _check_grads(params, grads)
    for name, grad in grads.items():
        params.values[name] = params.values[name] - lr * grad


class Optimizer:
    """Uniform wrapper so the trainer can swap update rules."""

    def __init__(self, kind: OptimizerKind, params: ParameterSet, lr: float):
        self.kind = OptimizerKind(kind)
        self.lr = lr
        self.state = AdadeltaState.for_params(params) if self.kind is OptimizerKind.ADADELTA else None

    def step(self, params: ParameterSet, grads: dict[str, Tensor]) -> None:
        if self.state is not None:
            adadelta_step(params, grads, self.state, self.lr)
        else:
            sgd_step(params, grads, self.lr)
