"""Mean squared error plus the smoothed f-divergence regularizer."""

import logging
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike

from .divergence import LabeledPointSet, hp_divergence_smoothed, smoothed_divergence_grad
from .errors import ContractViolation, NumericError
from .models import LossConfig
from .numerics import Tensor, as_tensor

logger = logging.getLogger(__name__)


@dataclass
class LossResult:
    """Objective value, gradient with respect to predictions and diagnostics."""

    value: float
    grad: Tensor
    mse: float
    d_raw: float | None = None

    @property
    def d_clamped(self) -> float | None:
        if self.d_raw is None:
            return None
        return min(1.0, max(0.0, self.d_raw))


def combined_loss(preds: ArrayLike, targets: ArrayLike, cfg: LossConfig) -> LossResult:
    """
    Batch objective ``mse + w * (d_raw - gamma)^2``.

    The divergence is the smoothed Henze-Penrose estimate between the target
    rows and the prediction rows, left unclamped so its gradient never
    saturates. Parameter-norm penalties are not part of this value.

    Args:
        preds: b x d2 network outputs
        targets: b x d2 ground truth
        cfg: Loss configuration (w, gamma, lambda)

    Returns:
        LossResult with the gradient with respect to ``preds``

    Raises:
        ContractViolation: On shape mismatch, or b = 1 with w > 0
    """
    preds = as_tensor(preds, name="preds")
    targets = as_tensor(targets, name="targets")
    if preds.shape != targets.shape:
        raise ContractViolation(f"preds {preds.shape} and targets {targets.shape} differ in shape")
    batch, d2 = preds.shape
    if batch < 1:
        raise ContractViolation("empty batch")

    residual = preds - targets
    count = batch * d2
    mse = float(np.sum(residual**2) / count)
    grad = 2.0 * residual / count
    value = mse

    d_raw = None
    if cfg.w > 0:
        if batch < 2:
            raise ContractViolation("the f-divergence regularizer needs a batch of at least 2")
        sets = LabeledPointSet(targets, preds)
        d_raw = hp_divergence_smoothed(sets, cfg.lam).d_raw
        gap = d_raw - cfg.gamma
        value += cfg.w * gap**2
        grad = grad + 2.0 * cfg.w * gap * smoothed_divergence_grad(sets, cfg.lam)

    if not np.isfinite(value):
        raise NumericError(f"loss is not finite (mse={mse}, d_raw={d_raw})")
    return LossResult(value=value, grad=grad, mse=mse, d_raw=d_raw)
