"""Pytest fixtures and configuration."""

import numpy as np
import pytest

from src.fdiv_regressor.data import TabularDataset, gen_synthetic_spectra, write_csv
from src.fdiv_regressor.models import SplitIndices
from src.fdiv_regressor.network import build_mlp, build_spectral_cnn
from src.fdiv_regressor.numerics import Rng


def _relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-4)
    return float(np.max(np.abs(analytic - numeric) / scale))


def _central_difference(fn, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    grad = np.zeros_like(x)
    for index in np.ndindex(x.shape):
        original = x[index]
        x[index] = original + h
        upper = fn(x)
        x[index] = original - h
        lower = fn(x)
        x[index] = original
        grad[index] = (upper - lower) / (2 * h)
    return grad


@pytest.fixture
def relative_error():
    """Max elementwise relative error, with a 1e-4 floor on the scale."""
    return _relative_error


@pytest.fixture
def central_difference():
    """Central-difference gradient of a scalar function of an array, coordinate by coordinate."""
    return _central_difference


@pytest.fixture
def rng() -> Rng:
    """Seeded random stream."""
    return Rng(1234)


@pytest.fixture
def interleaved_points() -> tuple[np.ndarray, np.ndarray]:
    """Targets {0, 2} and predictions {1, 3} on a line."""
    return np.array([[0.0], [2.0]]), np.array([[1.0], [3.0]])


@pytest.fixture
def separated_points() -> tuple[np.ndarray, np.ndarray]:
    """Two well-separated 1-D clusters."""
    return np.array([[0.0], [1.0]]), np.array([[10.0], [11.0]])


@pytest.fixture
def spectra() -> TabularDataset:
    """Small synthetic spectral dataset (d1=16, d2=2)."""
    return gen_synthetic_spectra(Rng(7), n=60, d1=16, d2=2, noise_sigma=0.1)


@pytest.fixture
def spectra_splits(spectra: TabularDataset) -> SplitIndices:
    """Fixed 48/6/6 split of the spectra fixture."""
    order = list(range(spectra.n))
    return SplitIndices(train=order[:48], val=order[48:54], test=order[54:])


@pytest.fixture
def small_cnn():
    """Spectral CNN on 16-channel spectra with two targets."""
    return build_spectral_cnn(16, 2)


@pytest.fixture
def small_mlp():
    """MLP 16 -> 8 -> 2."""
    return build_mlp([16, 8, 2])


@pytest.fixture
def spectra_csv(tmp_path, spectra: TabularDataset):
    """The spectra fixture written to a CSV file."""
    path = tmp_path / "spectra.csv"
    write_csv(spectra, path)
    return path
