#!/usr/bin/env python3
"""
Compare the best-validated f-divergence configuration against an
unregularized network on synthetic spectra with noisy targets.

Test RMSE is measured against the noise-free targets, averaged over seeds.
"""

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

# Add src to path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root / "src"))

from fdiv_regressor.data import TabularDataset, gen_synthetic_spectra, prepare_splits  # noqa: E402
from fdiv_regressor.evaluation import rmse  # noqa: E402
from fdiv_regressor.models import TrainConfig  # noqa: E402
from fdiv_regressor.network import build_spectral_cnn, predict  # noqa: E402
from fdiv_regressor.numerics import Rng, sample_gaussian  # noqa: E402
from fdiv_regressor.train import effective_spec, grid_configs, hyperparameter_sweep, train  # noqa: E402

logging.basicConfig(
    level=logging.WARNING,
    format="%(asctime)s - %(levelname)s - %(message)s",
)
logger = logging.getLogger(__name__)

DATA_STREAM = 0
NOISE_STREAM = 1
SPLIT_STREAM = 3


def print_section(title):
    print(f"\n{'=' * 60}")
    print(f"  {title}")
    print(f"{'=' * 60}")


def noisy_spectra(seed: int, n: int, d1: int, d2: int, noise_fraction: float):
    """
    Clean synthetic spectra plus a copy whose targets carry Gaussian noise.

    The noise scale of each target is ``noise_fraction`` times that target's
    standard deviation.

    Returns:
        (clean dataset, noisy dataset)
    """
    rng = Rng(seed)
    clean = gen_synthetic_spectra(rng.substream(DATA_STREAM), n=n, d1=d1, d2=d2)
    scale = noise_fraction * clean.Y.std(axis=0)
    noise = sample_gaussian(rng.substream(NOISE_STREAM), 0.0, 1.0, clean.Y.shape) * scale
    noisy = TabularDataset(clean.X, clean.Y + noise, clean.feature_names, clean.target_names)
    return clean, noisy


def run_seed(seed: int, args) -> tuple[float, float]:
    """Test RMSE (against clean targets) of the unregularized and the f-divergence models."""
    clean, noisy = noisy_spectra(seed, args.n, args.d1, args.d2, args.noise)
    prepared = prepare_splits(noisy, Rng(seed).substream(SPLIT_STREAM))
    test_rows = prepared.indices.test
    X_test = prepared.dataset.X[test_rows]
    Y_test = clean.Y[test_rows]

    spec = build_spectral_cnn(args.d1, args.d2)
    base = TrainConfig(epochs=args.epochs, batch_size=args.batch, seed=seed)

    params, _ = train(spec, prepared.dataset, prepared.indices, base)
    plain = rmse(predict(spec, params, X_test), Y_test).overall

    result, params, _ = hyperparameter_sweep(
        spec, prepared.dataset, prepared.indices, grid_configs("fdiv", base), seed=seed
    )
    winner = effective_spec(spec, result.best_config)
    regularized = rmse(predict(winner, params, X_test), Y_test).overall
    logger.info(f"seed {seed}: winner {result.best_config.describe()}")
    return plain, regularized


def main():
    parser = argparse.ArgumentParser(description="f-divergence vs unregularized benchmark")
    parser.add_argument("--seeds", type=int, default=10, help="Number of seeds (0..N-1)")
    parser.add_argument("--n", type=int, default=400, help="Samples per dataset")
    parser.add_argument("--d1", type=int, default=64, help="Spectrum length")
    parser.add_argument("--d2", type=int, default=3, help="Number of targets")
    parser.add_argument("--noise", type=float, default=0.2, help="Target noise as a fraction of std")
    parser.add_argument("--epochs", type=int, default=500)
    parser.add_argument("--batch", type=int, default=16)
    parser.add_argument("--max-ratio", type=float, default=1.02, help="Accepted RMSE ratio")
    parser.add_argument("-v", "--verbose", action="store_true", help="Log sweep winners")
    args = parser.parse_args()
    if args.verbose:
        logging.getLogger().setLevel(logging.INFO)

    print_section(f"Regularization benchmark: {args.seeds} seeds, N={args.n}, d1={args.d1}")
    plain_scores, fdiv_scores = [], []
    start = time.perf_counter()
    for seed in range(args.seeds):
        plain, regularized = run_seed(seed, args)
        plain_scores.append(plain)
        fdiv_scores.append(regularized)
        print(f"seed {seed}: none {plain:.5g}  fdiv {regularized:.5g}")

    ratio = float(np.mean(fdiv_scores)) / float(np.mean(plain_scores))
    elapsed = time.perf_counter() - start
    print_section("Summary")
    print(f"mean clean-target test RMSE: none {np.mean(plain_scores):.5g}  fdiv {np.mean(fdiv_scores):.5g}")
    print(f"ratio fdiv/none: {ratio:.4f} (accept <= {args.max_ratio}); {elapsed:.0f}s")
    return 0 if ratio <= args.max_ratio else 1


if __name__ == "__main__":
    sys.exit(main())
