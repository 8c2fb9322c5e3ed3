"""Dense-array kernels and seeded randomness shared by the estimators and the network.

Every tensor is a float64 ``numpy.ndarray``. Randomness flows through ``Rng``,
a Philox counter-based generator whose sub-streams are derived from integer
indices, so a parallel or reordered set of runs draws the same numbers.
"""

import logging
from typing import Sequence, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.spatial.distance import cdist
from scipy.special import softmax

from .errors import ContractViolation, NumericError

logger = logging.getLogger(__name__)

Tensor = NDArray[np.float64]
Shape = Union[int, Sequence[int]]


class Rng:
    """Seeded, splittable random stream.

    Sub-streams are addressed by index: ``Rng(7).substream(3)`` always yields
    the same sequence and is independent of ``Rng(7).substream(4)``.
    """

    def __init__(self, seed: int, key: tuple[int, ...] = ()):
        if seed < 0:
            raise ContractViolation(f"seed must be non-negative, got {seed}")
        self.seed = int(seed)
        self.key = tuple(int(k) for k in key)
        sequence = np.random.SeedSequence(self.seed, spawn_key=self.key)
        self.generator = np.random.Generator(np.random.Philox(sequence))

    def substream(self, index: int) -> "Rng":
        """Independent child stream derived from this stream's seed and key."""
        if index < 0:
            raise ContractViolation(f"substream index must be non-negative, got {index}")
        return Rng(self.seed, self.key + (index,))

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed}, key={self.key})"


def as_tensor(values: ArrayLike, ndim: int = 2, name: str = "input") -> Tensor:
    """
    Convert to a finite float64 array of the given rank.

    Raises:
        ContractViolation: If the rank is wrong
        NumericError: If any entry is NaN or infinite
    """
    array = np.asarray(values, dtype=np.float64)
    if array.ndim == 1 and ndim == 2:
        array = array.reshape(-1, 1)
    if array.ndim != ndim:
        raise ContractViolation(f"{name} must be {ndim}-D, got shape {array.shape}")
    if not np.all(np.isfinite(array)):
        raise NumericError(f"{name} contains NaN or Inf")
    return array


def pairwise_distances(a: ArrayLike, b: ArrayLike) -> Tensor:
    """
    Euclidean distance matrix between the rows of two point matrices.

    Args:
        a: m x d points
        b: k x d points

    Returns:
        m x k matrix with entry (i, j) = ||a_i - b_j||
    """
    a = as_tensor(a, name="a")
    b = as_tensor(b, name="b")
    if a.shape[1] != b.shape[1] or a.shape[1] < 1:
        raise ContractViolation(f"dimension mismatch: {a.shape} vs {b.shape}")
    return cdist(a, b, metric="euclidean")


def row_softmax_neg_scaled(dist: ArrayLike, lam: float) -> Tensor:
    """
    Row softmax of -dist/lam with the diagonal excluded from every row.

    Args:
        dist: n x n distance matrix (diagonal ignored)
        lam: Positive temperature

    Returns:
        n x n row-stochastic matrix with an exactly zero diagonal
    """
    dist = as_tensor(dist, name="dist")
    n = dist.shape[0]
    if dist.shape != (n, n):
        raise ContractViolation(f"dist must be square, got {dist.shape}")
    if n < 2:
        raise ContractViolation("row softmax needs n >= 2 (no neighbors exist)")
    if not lam > 0:
        raise ContractViolation(f"lambda must be positive, got {lam}")

    logits = -dist / lam
    np.fill_diagonal(logits, -np.inf)
    return softmax(logits, axis=1)


def sample_gaussian(rng: Rng, mu: float, sigma: float, shape: Shape) -> Tensor:
    """Draw N(mu, sigma^2) values; sigma = 0 returns mu exactly."""
    if sigma < 0:
        raise ContractViolation(f"sigma must be >= 0, got {sigma}")
    return rng.generator.normal(loc=mu, scale=sigma, size=shape).astype(np.float64)


def sample_uniform(rng: Rng, lo: float, hi: float, shape: Shape) -> Tensor:
    """Draw values uniformly from [lo, hi)."""
    if lo > hi:
        raise ContractViolation(f"lo must not exceed hi, got [{lo}, {hi})")
    return rng.generator.uniform(low=lo, high=hi, size=shape).astype(np.float64)
