"""RMSE reporting and paired t-tests between two models' per-sample errors."""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike
from scipy.special import betainc

from .config import settings
from .errors import ContractViolation
from .models import EvalReport, TTestResult
from .numerics import Tensor, as_tensor

logger = logging.getLogger(__name__)

ALL_TARGETS = 0


def rmse(preds: ArrayLike, targets: ArrayLike) -> EvalReport:
    """
    Root mean squared error per target column and over all entries.

    Args:
        preds: N x d2 predictions
        targets: N x d2 ground truth

    Returns:
        EvalReport
    """
    preds = as_tensor(preds, name="preds")
    targets = as_tensor(targets, name="targets")
    if preds.shape != targets.shape:
        raise ContractViolation(f"preds {preds.shape} and targets {targets.shape} differ in shape")
    if preds.shape[0] < 1:
        raise ContractViolation("rmse needs at least one row")
    squared = (preds - targets) ** 2
    return EvalReport(
        per_target=np.sqrt(squared.mean(axis=0)).tolist(),
        overall=float(np.sqrt(squared.mean())),
        n_samples=preds.shape[0],
    )


def student_t_two_sided_p(t: float, df: int) -> float:
    """P(|T| >= |t|) for Student's t with ``df`` degrees of freedom."""
    if np.isinf(t):
        return 0.0
    return float(betainc(df / 2.0, 0.5, df / (df + t * t)))


def paired_t_test(errors_a: ArrayLike, errors_b: ArrayLike, level: Optional[float] = None) -> TTestResult:
    """
    Two-sided paired t-test on per-sample errors.

    Args:
        errors_a: Length-N per-sample errors of model A
        errors_b: Length-N per-sample errors of model B, paired by sample
        level: Significance level (defaults to the configured level)

    Returns:
        TTestResult; identical inputs give t = 0, p = 1. Differences that
        are nonzero but constant are flagged degenerate with p = 0.
    """
    level = settings.significance_level if level is None else level
    a = np.asarray(errors_a, dtype=np.float64).ravel()
    b = np.asarray(errors_b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ContractViolation(f"paired errors differ in length: {a.size} vs {b.size}")
    if a.size < 2:
        raise ContractViolation(f"paired t-test needs N >= 2, got {a.size}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ContractViolation("paired errors contain NaN or Inf")

    diff = a - b
    df = diff.size - 1
    mean = float(diff.mean())
    sd = float(diff.std(ddof=1))

    if sd == 0.0:
        if mean == 0.0:
            return TTestResult(t=0.0, df=df, p=1.0, level=level, significant=False)
        logger.warning("paired differences are constant and nonzero; reporting a degenerate test")
        return TTestResult(
            t=float(np.copysign(np.inf, mean)), df=df, p=0.0, level=level, significant=True, degenerate=True
        )

    t = mean / (sd / np.sqrt(diff.size))
    p = min(1.0, max(0.0, student_t_two_sided_p(t, df)))
    return TTestResult(t=float(t), df=df, p=p, level=level, significant=p < level)


def per_sample_errors(preds: Tensor, targets: Tensor, target: int = ALL_TARGETS) -> Tensor:
    """
    Paired unit of the model comparison.

    ``target`` is 1-based: the squared error of that column per row. With
    ``ALL_TARGETS`` it is the per-row mean squared error across targets.
    """
    squared = (np.asarray(preds) - np.asarray(targets)) ** 2
    if target == ALL_TARGETS:
        return squared.mean(axis=1)
    if not 1 <= target <= squared.shape[1]:
        raise ContractViolation(f"target {target} out of range 1..{squared.shape[1]}")
    return squared[:, target - 1]


@dataclass
class ComparisonRow:
    """One line of a two-model comparison; ``target`` is 1-based or ``ALL_TARGETS``."""

    target: int
    name: str
    rmse_a: float
    rmse_b: float
    test: TTestResult

    @property
    def verdict(self) -> int:
        """-1 when A is significantly better, +1 when B is, 0 otherwise."""
        if not self.test.significant:
            return 0
        return -1 if self.test.t < 0 else 1


def compare_predictions(
    preds_a: ArrayLike,
    preds_b: ArrayLike,
    targets: ArrayLike,
    target_names: Optional[list[str]] = None,
    level: Optional[float] = None,
) -> list[ComparisonRow]:
    """Per-target and all-target RMSEs of two models with paired t-tests on their errors."""
    preds_a = as_tensor(preds_a, name="preds_a")
    preds_b = as_tensor(preds_b, name="preds_b")
    targets = as_tensor(targets, name="targets")
    report_a = rmse(preds_a, targets)
    report_b = rmse(preds_b, targets)
    d2 = targets.shape[1]
    names = target_names or [f"y{j}" for j in range(d2)]

    rows = []
    for target in range(1, d2 + 1):
        test = paired_t_test(
            per_sample_errors(preds_a, targets, target),
            per_sample_errors(preds_b, targets, target),
            level,
        )
        rows.append(
            ComparisonRow(
                target,
                names[target - 1],
                report_a.per_target[target - 1],
                report_b.per_target[target - 1],
                test,
            )
        )
    overall_test = paired_t_test(
        per_sample_errors(preds_a, targets), per_sample_errors(preds_b, targets), level
    )
    rows.append(ComparisonRow(ALL_TARGETS, "all", report_a.overall, report_b.overall, overall_test))
    return rows
