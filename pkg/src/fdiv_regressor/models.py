"""Pydantic models for configurations, layer specifications and reports."""

from enum import Enum
from typing import Annotated, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator


class ForwardMode(str, Enum):
    """Network forward-pass modes."""

    TRAIN = "train"
    EVAL = "eval"


class OptimizerKind(str, Enum):
    """Parameter update rules available to the trainer."""

    ADADELTA = "adadelta"
    SGD = "sgd"


class PenaltyKind(str, Enum):
    """Parameter-norm penalties."""

    L1 = "l1"
    L2 = "l2"


class LossKind(str, Enum):
    """Empirical risks compared by the grid-search simulation."""

    MSE = "mse"
    FDIV = "fdiv"


class EstimatorKind(str, Enum):
    """Henze-Penrose estimator flavours."""

    EXACT = "exact"
    SMOOTHED = "smoothed"


# =============================================================================
# Layer specifications
# =============================================================================


class DenseSpec(BaseModel):
    """Fully connected layer y = x W^T + c."""

    kind: Literal["dense"] = "dense"
    in_features: int = Field(..., ge=1)
    out_features: int = Field(..., ge=1)


class Conv1dSpec(BaseModel):
    """One-dimensional convolution over (channels, length) inputs."""

    kind: Literal["conv1d"] = "conv1d"
    in_channels: int = Field(..., ge=1)
    out_channels: int = Field(..., ge=1)
    kernel_size: int = Field(5, ge=1)
    stride: int = Field(1, ge=1)
    padding: int = Field(2, ge=0)


class BatchNorm1dSpec(BaseModel):
    """Per-channel batch normalization."""

    kind: Literal["batchnorm1d"] = "batchnorm1d"
    channels: int = Field(..., ge=1)
    momentum: float = Field(0.1, gt=0.0, le=1.0)
    epsilon: float = Field(1e-5, gt=0.0)


class ReluSpec(BaseModel):
    kind: Literal["relu"] = "relu"


class MaxPool1dSpec(BaseModel):
    """Non-overlapping max pooling; trailing positions that do not fill a window are dropped."""

    kind: Literal["maxpool1d"] = "maxpool1d"
    window: int = Field(2, ge=1)


class DropoutSpec(BaseModel):
    """Inverted dropout, identity in eval mode."""

    kind: Literal["dropout"] = "dropout"
    rate: float = Field(0.0, ge=0.0, lt=1.0)


class FlattenSpec(BaseModel):
    kind: Literal["flatten"] = "flatten"


LayerSpec = Annotated[
    Union[
        DenseSpec,
        Conv1dSpec,
        BatchNorm1dSpec,
        ReluSpec,
        MaxPool1dSpec,
        DropoutSpec,
        FlattenSpec,
    ],
    Field(discriminator="kind"),
]


def layer_output_shape(layer: BaseModel, shape: tuple[int, ...]) -> tuple[int, ...]:
    """
    Per-sample output shape of a layer.

    Args:
        layer: Layer specification
        shape: Per-sample input shape, either (features,) or (channels, length)

    Returns:
        Per-sample output shape

    Raises:
        ValueError: If the layer cannot consume the input shape
    """
    if isinstance(layer, DenseSpec):
        if len(shape) != 1 or shape[0] != layer.in_features:
            raise ValueError(f"dense expects ({layer.in_features},), got {shape}")
        return (layer.out_features,)

    if isinstance(layer, Conv1dSpec):
        # A flat (length,) input is read as a single channel
        if len(shape) == 1:
            shape = (1, shape[0])
        channels, length = shape
        if channels != layer.in_channels:
            raise ValueError(f"conv1d expects {layer.in_channels} channels, got {channels}")
        out_length = (length + 2 * layer.padding - layer.kernel_size) // layer.stride + 1
        if out_length < 1:
            raise ValueError(f"conv1d kernel {layer.kernel_size} does not fit length {length}")
        return (layer.out_channels, out_length)

    if isinstance(layer, BatchNorm1dSpec):
        if shape[0] != layer.channels or len(shape) > 2:
            raise ValueError(f"batchnorm1d expects {layer.channels} channels, got {shape}")
        return shape

    if isinstance(layer, MaxPool1dSpec):
        if len(shape) != 2:
            raise ValueError(f"maxpool1d expects (channels, length), got {shape}")
        channels, length = shape
        if length < layer.window:
            raise ValueError(f"maxpool1d window {layer.window} exceeds length {length}")
        return (channels, length // layer.window)

    if isinstance(layer, FlattenSpec):
        size = 1
        for dim in shape:
            size *= dim
        return (size,)

    # relu, dropout
    return shape


class ModelSpec(BaseModel):
    """Ordered layer pipeline mapping d1 input features to d2 outputs."""

    layers: list[LayerSpec] = Field(..., min_length=1)
    input_dim: int = Field(..., ge=1)
    output_dim: int = Field(..., ge=1)

    @model_validator(mode="after")
    def _check_shapes(self) -> "ModelSpec":
        shape = self.shapes()[-1]
        if shape != (self.output_dim,):
            raise ValueError(f"final output shape {shape} does not match output_dim {self.output_dim}")
        return self

    def shapes(self) -> list[tuple[int, ...]]:
        """Per-sample input shape of every layer followed by the output shape."""
        shapes: list[tuple[int, ...]] = [(self.input_dim,)]
        for index, layer in enumerate(self.layers):
            try:
                shapes.append(layer_output_shape(layer, shapes[-1]))
            except ValueError as e:
                raise ValueError(f"layer {index} ({layer.kind}): {e}") from e
        return shapes

    def has_dropout(self) -> bool:
        return any(isinstance(layer, DropoutSpec) for layer in self.layers)


# =============================================================================
# Configurations
# =============================================================================


class LossConfig(BaseModel):
    """Knobs of the regularized objective and the parameter penalties."""

    model_config = ConfigDict(populate_by_name=True)

    w: float = Field(0.0, ge=0.0, description="f-divergence regularization strength")
    gamma: float = Field(0.0, ge=0.0, le=1.0, description="Enforced divergence level")
    lam: float = Field(2.0, gt=0.0, alias="lambda", description="Softmax scale")
    l1_strength: float = Field(0.0, ge=0.0)
    l2_strength: float = Field(0.0, ge=0.0)


class TrainConfig(BaseModel):
    """Minibatch training settings."""

    epochs: int = Field(500, ge=1)
    batch_size: int = Field(16, ge=1)
    lr: float = Field(1.0, gt=0.0)
    loss: LossConfig = Field(default_factory=LossConfig)
    seed: int = Field(0, ge=0)
    optimizer: OptimizerKind = OptimizerKind.ADADELTA
    dropout_rate: Optional[float] = Field(
        None, ge=0.0, lt=1.0, description="Overrides the rate of every dropout layer when set"
    )

    @model_validator(mode="after")
    def _check_batch(self) -> "TrainConfig":
        if self.loss.w > 0 and self.batch_size < 2:
            raise ValueError("batch_size must be >= 2 when the f-divergence regularizer is on")
        return self

    def describe(self) -> str:
        """Short label of the active regularizers."""
        parts = []
        if self.loss.l1_strength > 0:
            parts.append(f"l1={self.loss.l1_strength:g}")
        if self.loss.l2_strength > 0:
            parts.append(f"l2={self.loss.l2_strength:g}")
        if self.dropout_rate:
            parts.append(f"dropout={self.dropout_rate:g}")
        if self.loss.w > 0:
            parts.append(f"fdiv(w={self.loss.w:g},gamma={self.loss.gamma:g},lambda={self.loss.lam:g})")
        return "+".join(parts) or "none"


class SimConfig(BaseModel):
    """Grid-search simulation settings on the noisy quadratic."""

    a_true: float = 0.4
    b_true: float = 0.4
    sigma: float = Field(2.0, ge=0.0)
    n_points: int = Field(30, ge=2)
    grid_lo: float = 0.2
    grid_hi: float = 0.6
    grid_step: float = Field(0.1, gt=0.0)
    gamma: float = Field(0.5, ge=0.0, le=1.0)
    runs: int = Field(200, ge=1)
    seed: int = Field(0, ge=0)

    @model_validator(mode="after")
    def _check_grid(self) -> "SimConfig":
        values = self.grid_values()
        for name, truth in (("a_true", self.a_true), ("b_true", self.b_true)):
            if not any(abs(v - truth) < 1e-9 for v in values):
                raise ValueError(f"{name}={truth} is not on the grid {values}")
        return self

    def grid_values(self) -> list[float]:
        """Candidate coefficient values, rounded to remove accumulation error."""
        count = int(round((self.grid_hi - self.grid_lo) / self.grid_step)) + 1
        return [round(self.grid_lo + k * self.grid_step, 10) for k in range(count)]


# =============================================================================
# Data containers and reports
# =============================================================================


class SplitIndices(BaseModel):
    """Disjoint train/validation/test row indices."""

    train: list[int]
    val: list[int]
    test: list[int]

    @model_validator(mode="after")
    def _check_disjoint(self) -> "SplitIndices":
        seen = set(self.train)
        for name in ("val", "test"):
            part = set(getattr(self, name))
            if seen & part:
                raise ValueError(f"{name} indices overlap an earlier split")
            seen |= part
        return self


class Scaler(BaseModel):
    """Per-feature standardization statistics fitted on training rows."""

    mean: list[float]
    std: list[float]


class DivergenceReport(BaseModel):
    """Henze-Penrose estimator output."""

    estimator: EstimatorKind
    n0: int = Field(..., ge=1)
    n1: int = Field(..., ge=1)
    n: int = Field(..., ge=2)
    alpha: float = Field(..., gt=0.0, lt=1.0)
    cut_mass: float = Field(..., ge=0.0)
    d_raw: float
    d_clamped: float = Field(..., ge=0.0, le=1.0)


class TrainReport(BaseModel):
    """Per-epoch training history and the selected checkpoint."""

    train_loss: list[float] = Field(default_factory=list)
    val_mse: list[float] = Field(default_factory=list)
    best_val_history: list[float] = Field(default_factory=list)
    best_epoch: int = Field(0, description="1-based epoch of the returned parameters")
    best_val_mse: float = float("inf")


class EvalReport(BaseModel):
    """Root mean squared errors per target and overall."""

    per_target: list[float]
    overall: float = Field(..., ge=0.0)
    n_samples: int = Field(..., ge=1)


class TTestResult(BaseModel):
    """Paired two-sided t-test outcome."""

    t: float
    df: int = Field(..., ge=1)
    p: float = Field(..., ge=0.0, le=1.0)
    level: float = Field(..., gt=0.0, lt=1.0)
    significant: bool
    degenerate: bool = False


class FrequencyMap(BaseModel):
    """How often each grid pair was selected across simulation runs."""

    loss_kind: LossKind
    a_values: list[float]
    b_values: list[float]
    counts: list[list[int]] = Field(..., description="counts[i][j] for (a_values[i], b_values[j])")
    runs: int = Field(..., ge=1)

    @model_validator(mode="after")
    def _check_total(self) -> "FrequencyMap":
        total = sum(sum(row) for row in self.counts)
        if total != self.runs:
            raise ValueError(f"counts sum to {total}, expected {self.runs}")
        return self

    def hits(self, a: float, b: float) -> int:
        """Count recorded at the grid pair closest to (a, b)."""
        i = min(range(len(self.a_values)), key=lambda k: abs(self.a_values[k] - a))
        j = min(range(len(self.b_values)), key=lambda k: abs(self.b_values[k] - b))
        return self.counts[i][j]


class SweepRow(BaseModel):
    """One trained configuration of a hyperparameter sweep."""

    config_index: int
    label: str
    best_val_mse: float
    best_epoch: int
    score: Optional[float] = Field(
        None, description="Extra per-configuration metric, not used for selection"
    )


class SweepResult(BaseModel):
    """Winner of a hyperparameter sweep and the full table."""

    best_index: int
    best_config: TrainConfig
    rows: list[SweepRow]
