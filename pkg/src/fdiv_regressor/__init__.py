"""f-divergence regularized multi-target regression for spectral data."""

__version__ = "0.1.0"

from .divergence import (
    LabeledPointSet,
    hp_divergence_exact,
    hp_divergence_smoothed,
    smoothed_divergence_grad,
)
from .loss import combined_loss
from .models import (
    DivergenceReport,
    LossConfig,
    ModelSpec,
    SimConfig,
    TrainConfig,
    TrainReport,
)
from .network import build_mlp, build_spectral_cnn
from .train import hyperparameter_sweep, train

__all__ = [
    "LabeledPointSet",
    "hp_divergence_exact",
    "hp_divergence_smoothed",
    "smoothed_divergence_grad",
    "combined_loss",
    "DivergenceReport",
    "LossConfig",
    "ModelSpec",
    "SimConfig",
    "TrainConfig",
    "TrainReport",
    "build_mlp",
    "build_spectral_cnn",
    "hyperparameter_sweep",
    "train",
]
