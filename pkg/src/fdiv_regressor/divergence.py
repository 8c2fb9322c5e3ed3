"""Graph-based Henze-Penrose divergence estimation.

Two estimators share the same pooled node ordering (all of ``points_a`` by
row, then all of ``points_b`` by row):

- the exact estimator counts directed nearest-neighbor edges whose endpoints
  carry different labels and inverts the asymptotic cut-edge ratio;
- the smoothed estimator replaces each node's single nearest neighbor with a
  softmax over all other nodes (temperature ``lam``), which makes the cut
  mass differentiable in the point coordinates.
"""

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ContractViolation
from .models import DivergenceReport, EstimatorKind
from .numerics import Tensor, as_tensor, pairwise_distances, row_softmax_neg_scaled

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LabeledPointSet:
    """Targets (label 0) and predictions (label 1) pooled into one node set."""

    points_a: Tensor
    points_b: Tensor

    def __post_init__(self) -> None:
        a = as_tensor(self.points_a, name="points_a")
        b = as_tensor(self.points_b, name="points_b")
        if a.shape[0] < 1 or b.shape[0] < 1:
            raise ContractViolation("both point sets must be nonempty")
        if a.shape[1] != b.shape[1]:
            raise ContractViolation(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
        object.__setattr__(self, "points_a", a)
        object.__setattr__(self, "points_b", b)

    @property
    def n0(self) -> int:
        return self.points_a.shape[0]

    @property
    def n1(self) -> int:
        return self.points_b.shape[0]

    @property
    def n(self) -> int:
        return self.n0 + self.n1

    @cached_property
    def pooled(self) -> Tensor:
        return np.vstack([self.points_a, self.points_b])

    @cached_property
    def labels(self) -> np.ndarray:
        return np.concatenate([np.zeros(self.n0, dtype=int), np.ones(self.n1, dtype=int)])

    def cross_mask(self) -> np.ndarray:
        """n x n boolean matrix, True where the two nodes carry different labels."""
        return self.labels[:, None] != self.labels[None, :]


def f_alpha(t: float, alpha: float) -> float:
    """
    The f-function whose divergence the cut-edge ratio recovers.

    Args:
        t: Density ratio (>= 0)
        alpha: Sample proportion n0/n in (0, 1)

    Returns:
        f(t), with f(1) = 0 exactly
    """
    if not 0.0 < alpha < 1.0:
        raise ContractViolation(f"alpha must lie in (0, 1), got {alpha}")
    if t < 0:
        raise ContractViolation(f"t must be >= 0, got {t}")
    beta = 1.0 - alpha
    scaled = alpha * t
    return ((scaled - beta) ** 2 / (scaled + beta) - (alpha - beta) ** 2) / (4.0 * alpha * beta)


def _report(sets: LabeledPointSet, cut_mass: float, d_raw: float, kind: EstimatorKind) -> DivergenceReport:
    return DivergenceReport(
        estimator=kind,
        n0=sets.n0,
        n1=sets.n1,
        n=sets.n,
        alpha=sets.n0 / sets.n,
        cut_mass=cut_mass,
        d_raw=d_raw,
        d_clamped=min(1.0, max(0.0, d_raw)),
    )


def nearest_neighbors(sets: LabeledPointSet) -> np.ndarray:
    """Index of each node's nearest other node; ties go to the lowest pooled index."""
    if sets.n < 2:
        raise ContractViolation("nearest-neighbor graph needs n >= 2")
    dist = pairwise_distances(sets.pooled, sets.pooled)
    np.fill_diagonal(dist, np.inf)
    # argmin returns the first minimum, which is the lowest index
    return np.argmin(dist, axis=1)


def nn_cut_count(sets: LabeledPointSet) -> int:
    """Number of directed nearest-neighbor edges joining differently labeled nodes."""
    neighbors = nearest_neighbors(sets)
    return int(np.count_nonzero(sets.labels != sets.labels[neighbors]))


def hp_divergence_exact(sets: LabeledPointSet) -> DivergenceReport:
    """Henze-Penrose divergence from the nearest-neighbor cut count, any sample ratio."""
    cut = nn_cut_count(sets)
    d_raw = 1.0 - sets.n * cut / (2.0 * sets.n0 * sets.n1)
    logger.debug(f"exact HP: n0={sets.n0} n1={sets.n1} cut={cut} d_raw={d_raw:.6f}")
    return _report(sets, float(cut), d_raw, EstimatorKind.EXACT)


def _smoothed_terms(sets: LabeledPointSet, lam: float) -> tuple[Tensor, Tensor, np.ndarray]:
    if sets.n < 2:
        raise ContractViolation("smoothed cut mass needs n >= 2")
    dist = pairwise_distances(sets.pooled, sets.pooled)
    weights = row_softmax_neg_scaled(dist, lam)
    return dist, weights, sets.cross_mask()


def smoothed_cut_mass(sets: LabeledPointSet, lam: float) -> float:
    """
    Softmax-weighted cut mass over the fully connected graph.

    Each node spreads unit mass over all other nodes with weights
    exp(-distance/lam); the result sums the mass landing on nodes of the
    other label and lies in [0, n].
    """
    _, weights, cross = _smoothed_terms(sets, lam)
    return float(np.sum(weights[cross]))


def _check_balanced(sets: LabeledPointSet) -> None:
    if sets.n0 != sets.n1:
        raise ContractViolation(
            f"smoothed estimator compares equal-size sets, got n0={sets.n0}, n1={sets.n1}"
        )


def hp_divergence_smoothed(sets: LabeledPointSet, lam: float) -> DivergenceReport:
    """Differentiable divergence 1 - 2 * cut_mass / n for balanced sets."""
    _check_balanced(sets)
    cut = smoothed_cut_mass(sets, lam)
    d_raw = 1.0 - 2.0 * cut / sets.n
    return _report(sets, cut, d_raw, EstimatorKind.SMOOTHED)


def smoothed_divergence_grad(sets: LabeledPointSet, lam: float) -> Tensor:
    """
    Gradient of the smoothed d_raw with respect to the coordinates of points_b.

    With P the row softmax and C the cross-label mask, the cut mass of row i
    is c_i = sum_j C_ij P_ij, and its derivative with respect to the distance
    D_ik is -P_ik (C_ik - c_i) / lam. Each distance then moves both of its
    endpoints along their unit difference vector. Coincident points
    contribute no gradient.

    Returns:
        n1 x d gradient array
    """
    _check_balanced(sets)
    dist, weights, cross = _smoothed_terms(sets, lam)

    row_cut = np.sum(weights * cross, axis=1, keepdims=True)
    d_cut_d_dist = -weights * (cross - row_cut) / lam
    np.fill_diagonal(d_cut_d_dist, 0.0)

    # Each pairwise distance appears in row i and row j of the cut mass
    sym = d_cut_d_dist + d_cut_d_dist.T
    with np.errstate(divide="ignore", invalid="ignore"):
        coupling = np.where(dist > 0, sym / dist, 0.0)

    points = sets.pooled
    grad_cut = coupling.sum(axis=1, keepdims=True) * points - coupling @ points
    grad = -2.0 / sets.n * grad_cut
    return grad[sets.n0 :]
