"""Tabular datasets: CSV I/O, seeded splitting, feature scaling and synthetic generators."""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd

from .errors import ContractViolation, DataLoadError
from .models import Scaler, SplitIndices
from .numerics import Rng, Tensor, sample_gaussian, sample_uniform

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

QUADRATIC_X_RANGE = (-2.0, 2.0)


@dataclass
class TabularDataset:
    """Feature matrix X (N x d1) and target matrix Y (N x d2) with column names."""

    X: Tensor
    Y: Tensor
    feature_names: list[str] = field(default_factory=list)
    target_names: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.X = np.asarray(self.X, dtype=np.float64)
        self.Y = np.asarray(self.Y, dtype=np.float64)
        if self.X.ndim != 2 or self.Y.ndim != 2:
            raise ContractViolation(f"X and Y must be 2-D, got {self.X.shape} and {self.Y.shape}")
        if self.X.shape[0] != self.Y.shape[0] or self.X.shape[0] < 1:
            raise ContractViolation(
                f"X and Y need the same nonzero row count, got {self.X.shape[0]} and {self.Y.shape[0]}"
            )
        if not self.feature_names:
            self.feature_names = [f"x{j}" for j in range(self.d1)]
        if not self.target_names:
            self.target_names = [f"y{j}" for j in range(self.d2)]

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d1(self) -> int:
        return self.X.shape[1]

    @property
    def d2(self) -> int:
        return self.Y.shape[1]

    def subset(self, indices: list[int]) -> "TabularDataset":
        rows = np.asarray(indices, dtype=int)
        return TabularDataset(self.X[rows], self.Y[rows], list(self.feature_names), list(self.target_names))

    def select_target(self, index: int) -> "TabularDataset":
        """Single-target view keeping only target column ``index``."""
        if not 0 <= index < self.d2:
            raise ContractViolation(f"target index {index} out of range for d2={self.d2}")
        return TabularDataset(
            self.X, self.Y[:, [index]], list(self.feature_names), [self.target_names[index]]
        )


# =============================================================================
# CSV I/O
# =============================================================================


def _parse_cell(text: str) -> float:
    """Correctly rounded float value of a cell, or NaN if it is not a number."""
    text = text.strip()
    if "_" in text:
        return np.nan
    try:
        return float(text)
    except ValueError:
        return np.nan


def read_numeric_csv(path: PathLike) -> tuple[Tensor, list[str]]:
    """
    Read a fully numeric CSV with one header row.

    Args:
        path: CSV file (UTF-8, comma separated)

    Returns:
        (N x columns values, column names)

    Raises:
        DataLoadError: Missing file, ragged rows, or non-numeric or
            non-finite cells (located by 1-based data row and column)
    """
    path = Path(path)
    if not path.is_file():
        raise DataLoadError("file not found", path=str(path))

    ragged: list[int] = []

    def _on_bad_line(fields: list[str]) -> None:
        ragged.append(len(fields))
        return None

    try:
        frame = pd.read_csv(
            path,
            sep=",",
            dtype=str,
            keep_default_na=False,
            engine="python",
            encoding="utf-8",
            on_bad_lines=_on_bad_line,
            skip_blank_lines=True,
        )
    except pd.errors.EmptyDataError as e:
        raise DataLoadError("file is empty", path=str(path)) from e
    except (pd.errors.ParserError, UnicodeDecodeError) as e:
        raise DataLoadError(f"could not parse CSV: {e}", path=str(path)) from e

    n_columns = frame.shape[1]
    if ragged:
        raise DataLoadError(
            f"ragged rows: expected {n_columns} columns, found a row with {ragged[0]}",
            path=str(path),
        )
    if frame.shape[0] < 1:
        raise DataLoadError("no data rows", path=str(path))
    # Short rows are padded with NaN by the parser (empty cells stay "")
    short_rows = np.flatnonzero(frame.isna().any(axis=1).to_numpy())
    if short_rows.size:
        raise DataLoadError(
            f"ragged row: expected {n_columns} columns",
            path=str(path),
            row=int(short_rows[0]) + 1,
        )

    numeric = frame.apply(lambda column: column.map(_parse_cell))
    values = numeric.to_numpy(dtype=np.float64)
    bad = ~np.isfinite(values)
    if bad.any():
        row, column = np.argwhere(bad)[0]
        raise DataLoadError(
            f"non-numeric or non-finite value '{frame.iat[row, column]}'",
            path=str(path),
            row=int(row) + 1,
            column=int(column) + 1,
        )
    return values, [str(c).strip() for c in frame.columns]


def load_csv(path: PathLike, n_targets: int) -> TabularDataset:
    """
    Load a numeric CSV with one header row; the last ``n_targets`` columns are Y.

    Args:
        path: CSV file (UTF-8, comma separated)
        n_targets: Number of trailing target columns d2

    Returns:
        TabularDataset

    Raises:
        DataLoadError: Any ``read_numeric_csv`` failure, or too few columns
    """
    if n_targets < 1:
        raise ContractViolation(f"n_targets must be >= 1, got {n_targets}")
    values, names = read_numeric_csv(path)
    n_columns = values.shape[1]
    if n_targets >= n_columns:
        raise DataLoadError(
            f"n_targets={n_targets} leaves no feature columns ({n_columns} columns)", path=str(path)
        )
    logger.info(
        f"Loaded {Path(path).name}: {values.shape[0]} rows, "
        f"{n_columns - n_targets} features, {n_targets} targets"
    )
    return TabularDataset(
        X=values[:, :-n_targets],
        Y=values[:, -n_targets:],
        feature_names=names[:-n_targets],
        target_names=names[-n_targets:],
    )


def load_points(path: PathLike) -> Tensor:
    """Load a point set: every column is a coordinate, every row a point."""
    values, _ = read_numeric_csv(path)
    return values


def write_csv(dataset: TabularDataset, path: PathLike) -> None:
    """Write features then targets with one header row, 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(
        np.hstack([dataset.X, dataset.Y]),
        columns=dataset.feature_names + dataset.target_names,
    )
    frame.to_csv(path, index=False, float_format="%.17g")
    logger.debug(f"Wrote {dataset.n} rows to {path}")


# =============================================================================
# Splitting and scaling
# =============================================================================


def split(n: int, rng: Rng) -> SplitIndices:
    """
    Seeded 80/10/10 split.

    Validation and test each get floor(0.1 * n) rows (at least 1); training
    takes the remainder.
    """
    if n < 3:
        raise ContractViolation(f"split needs at least 3 rows, got {n}")
    holdout = max(1, int(np.floor(0.1 * n)))
    order = rng.generator.permutation(n)
    n_train = n - 2 * holdout
    return SplitIndices(
        train=order[:n_train].tolist(),
        val=order[n_train : n_train + holdout].tolist(),
        test=order[n_train + holdout :].tolist(),
    )


def standardize_fit(X: Tensor) -> Scaler:
    """Columnwise mean and population standard deviation; zero std becomes 1."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1:
        raise ContractViolation(f"standardize_fit needs a nonempty 2-D array, got {X.shape}")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    constant = std == 0
    if constant.any():
        logger.warning(f"{int(constant.sum())} constant feature column(s); using std 1 for them")
    std[constant] = 1.0
    return Scaler(mean=mean.tolist(), std=std.tolist())


def standardize_apply(scaler: Scaler, X: Tensor) -> Tensor:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != len(scaler.mean):
        raise ContractViolation(f"scaler expects {len(scaler.mean)} columns, got shape {X.shape}")
    return (X - np.asarray(scaler.mean)) / np.asarray(scaler.std)


@dataclass
class PreparedSplits:
    """A dataset with features scaled by training-row statistics, plus its split."""

    dataset: TabularDataset
    indices: SplitIndices
    scaler: Optional[Scaler]

    @property
    def train(self) -> TabularDataset:
        return self.dataset.subset(self.indices.train)

    @property
    def val(self) -> TabularDataset:
        return self.dataset.subset(self.indices.val)

    @property
    def test(self) -> TabularDataset:
        return self.dataset.subset(self.indices.test)


def prepare_splits(dataset: TabularDataset, rng: Rng, standardize: bool = True) -> PreparedSplits:
    """Split, then standardize features using the training rows only. Targets stay in raw units."""
    indices = split(dataset.n, rng)
    scaler = None
    X = dataset.X
    if standardize:
        scaler = standardize_fit(dataset.X[indices.train])
        X = standardize_apply(scaler, dataset.X)
    scaled = TabularDataset(X, dataset.Y.copy(), list(dataset.feature_names), list(dataset.target_names))
    logger.info(
        f"Split {dataset.n} rows into {len(indices.train)}/{len(indices.val)}/{len(indices.test)} "
        f"(standardize={standardize})"
    )
    return PreparedSplits(dataset=scaled, indices=indices, scaler=scaler)


# =============================================================================
# Synthetic generators
# =============================================================================


def gen_quadratic(rng: Rng, n: int = 30, a: float = 0.4, b: float = 0.4, sigma: float = 2.0) -> TabularDataset:
    """Noisy quadratic y = a x^2 + b x + N(0, sigma^2) with x uniform on [-2, 2)."""
    if n < 1:
        raise ContractViolation(f"n must be >= 1, got {n}")
    x = sample_uniform(rng, *QUADRATIC_X_RANGE, shape=n)
    noise = sample_gaussian(rng, 0.0, sigma, shape=n)
    y = a * x**2 + b * x + noise
    return TabularDataset(x.reshape(-1, 1), y.reshape(-1, 1), ["x"], ["y"])


def gen_synthetic_spectra(
    rng: Rng,
    n: int,
    d1: int,
    d2: int,
    noise_sigma: float = 0.0,
    n_peaks: int = 6,
    peak_width: float = 2.0,
) -> TabularDataset:
    """
    Spectrum-like regression data.

    Each of ``n_peaks`` emission lines is a Gaussian bump at a fixed random
    channel; a sample's spectrum is the sum of the bumps scaled by its random
    line amplitudes. Each target is a fixed random linear plus quadratic
    function of the amplitudes, plus N(0, noise_sigma^2) noise.

    Args:
        rng: Random stream; the whole dataset is determined by it
        n: Number of samples
        d1: Spectrum length (>= 8)
        d2: Number of targets (>= 1)
        noise_sigma: Target noise scale
        n_peaks: Number of emission lines (<= d1)
        peak_width: Bump standard deviation in channels

    Returns:
        TabularDataset with channel features and oxide-like targets
    """
    if d1 < 8:
        raise ContractViolation(f"d1 must be >= 8, got {d1}")
    if d2 < 1 or n < 1:
        raise ContractViolation(f"need n >= 1 and d2 >= 1, got n={n}, d2={d2}")
    if not 1 <= n_peaks <= d1:
        raise ContractViolation(f"n_peaks must lie in [1, {d1}], got {n_peaks}")
    if noise_sigma < 0:
        raise ContractViolation(f"noise_sigma must be >= 0, got {noise_sigma}")

    # Fixed structure first, so n does not change the generator's functionals
    centers = rng.generator.choice(d1, size=n_peaks, replace=False).astype(np.float64)
    linear = rng.generator.normal(size=(n_peaks, d2))
    quadratic = rng.generator.normal(scale=0.5, size=(n_peaks, d2))
    offset = rng.generator.uniform(0.0, 5.0, size=d2)

    channels = np.arange(d1, dtype=np.float64)
    bumps = np.exp(-0.5 * ((channels[None, :] - centers[:, None]) / peak_width) ** 2)

    amplitudes = rng.generator.uniform(0.0, 1.0, size=(n, n_peaks))
    X = amplitudes @ bumps
    Y = offset + amplitudes @ linear + amplitudes**2 @ quadratic
    if noise_sigma > 0:
        Y = Y + sample_gaussian(rng, 0.0, noise_sigma, shape=Y.shape)

    return TabularDataset(
        X=X,
        Y=Y,
        feature_names=[f"ch{j}" for j in range(d1)],
        target_names=[f"target{j}" for j in range(d2)],
    )
