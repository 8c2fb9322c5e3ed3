"""Layer-pipeline networks with explicit forward and backward passes.

A network is a declarative ``ModelSpec`` plus a ``ParameterSet`` holding the
learnable tensors and the batch-norm running statistics. Parameter names are
``"<layer index>.<tensor>"``; dense and convolution layers own ``weight`` and
``bias``, batch-norm layers own ``gamma``/``beta`` (learnable) and
``running_mean``/``running_var`` (state).
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ContractViolation, NumericError
from .models import (
    BatchNorm1dSpec,
    Conv1dSpec,
    DenseSpec,
    DropoutSpec,
    FlattenSpec,
    ForwardMode,
    MaxPool1dSpec,
    ModelSpec,
    PenaltyKind,
    ReluSpec,
)
from .numerics import Rng, Tensor

logger = logging.getLogger(__name__)

SPECTRAL_CNN_CHANNELS = (32, 16, 8)


# =============================================================================
# Model builders
# =============================================================================


def build_spectral_cnn(d1: int, d2: int, dropout: float = 0.0) -> ModelSpec:
    """
    Three conv blocks (conv k=5 -> batchnorm -> relu -> maxpool 2) with
    channels 1 -> 32 -> 16 -> 8, then flatten and a linear head to d2.

    Args:
        d1: Spectrum length (>= 8 so three halvings leave at least one position)
        d2: Number of targets
        dropout: When > 0, a dropout layer follows every block

    Returns:
        ModelSpec for the network
    """
    if d1 < 8:
        raise ContractViolation(f"spectral CNN needs d1 >= 8, got {d1}")
    if d2 < 1:
        raise ContractViolation(f"d2 must be >= 1, got {d2}")

    layers: list[Any] = []
    in_channels = 1
    length = d1
    for out_channels in SPECTRAL_CNN_CHANNELS:
        layers += [
            Conv1dSpec(in_channels=in_channels, out_channels=out_channels),
            BatchNorm1dSpec(channels=out_channels),
            ReluSpec(),
            MaxPool1dSpec(window=2),
        ]
        if dropout > 0:
            layers.append(DropoutSpec(rate=dropout))
        in_channels = out_channels
        length //= 2
    layers += [FlattenSpec(), DenseSpec(in_features=in_channels * length, out_features=d2)]
    return ModelSpec(layers=layers, input_dim=d1, output_dim=d2)


def build_mlp(layer_widths: list[int], dropout: float = 0.0) -> ModelSpec:
    """Dense/relu stack over the given widths with a linear final layer."""
    if len(layer_widths) < 2:
        raise ContractViolation(f"an MLP needs at least 2 widths, got {layer_widths}")
    layers: list[Any] = []
    pairs = list(zip(layer_widths[:-1], layer_widths[1:]))
    for index, (width_in, width_out) in enumerate(pairs):
        layers.append(DenseSpec(in_features=width_in, out_features=width_out))
        if index < len(pairs) - 1:
            layers.append(ReluSpec())
            if dropout > 0:
                layers.append(DropoutSpec(rate=dropout))
    return ModelSpec(layers=layers, input_dim=layer_widths[0], output_dim=layer_widths[-1])


def with_dropout_rate(spec: ModelSpec, rate: float) -> ModelSpec:
    """Copy of ``spec`` with every dropout layer set to ``rate``."""
    if rate > 0 and not spec.has_dropout():
        raise ContractViolation("dropout rate given but the model has no dropout layers")
    layers = [
        DropoutSpec(rate=rate) if isinstance(layer, DropoutSpec) else layer for layer in spec.layers
    ]
    return spec.model_copy(update={"layers": layers})


# =============================================================================
# Parameters
# =============================================================================


@dataclass
class ParameterSet:
    """Learnable tensors and non-learnable running statistics, keyed by name."""

    values: dict[str, Tensor] = field(default_factory=dict)
    state: dict[str, Tensor] = field(default_factory=dict)

    def copy(self) -> "ParameterSet":
        return ParameterSet(
            values={k: v.copy() for k, v in self.values.items()},
            state={k: v.copy() for k, v in self.state.items()},
        )

    def count(self) -> int:
        """Number of learnable scalars."""
        return int(sum(v.size for v in self.values.values()))

    def penalized_names(self) -> list[str]:
        """Weight matrices and convolution kernels; biases and batch-norm parameters are exempt."""
        return [name for name in self.values if name.endswith(".weight")]


def init_params(spec: ModelSpec, rng: Rng) -> ParameterSet:
    """Glorot-uniform weights, zero biases, unit batch-norm scale."""
    params = ParameterSet()
    for index, layer in enumerate(spec.layers):
        prefix = f"{index}."
        if isinstance(layer, DenseSpec):
            shape = (layer.out_features, layer.in_features)
            limit = np.sqrt(6.0 / (layer.in_features + layer.out_features))
            params.values[prefix + "weight"] = rng.generator.uniform(-limit, limit, size=shape)
            params.values[prefix + "bias"] = np.zeros(layer.out_features)
        elif isinstance(layer, Conv1dSpec):
            shape = (layer.out_channels, layer.in_channels, layer.kernel_size)
            fan_in = layer.in_channels * layer.kernel_size
            fan_out = layer.out_channels * layer.kernel_size
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            params.values[prefix + "weight"] = rng.generator.uniform(-limit, limit, size=shape)
            params.values[prefix + "bias"] = np.zeros(layer.out_channels)
        elif isinstance(layer, BatchNorm1dSpec):
            params.values[prefix + "gamma"] = np.ones(layer.channels)
            params.values[prefix + "beta"] = np.zeros(layer.channels)
            params.state[prefix + "running_mean"] = np.zeros(layer.channels)
            params.state[prefix + "running_var"] = np.ones(layer.channels)
    logger.debug(f"Initialized {params.count()} learnable parameters")
    return params


# =============================================================================
# Forward / backward
# =============================================================================


@dataclass
class ForwardCache:
    """Per-layer values saved by a train-mode forward pass for one backward call."""

    entries: list[dict[str, Any]]
    n_layers: int
    consumed: bool = False


def _bn_axes(x: Tensor) -> tuple[int, ...]:
    return (0, 2) if x.ndim == 3 else (0,)


def _bn_view(vector: Tensor, x: Tensor) -> Tensor:
    return vector[None, :, None] if x.ndim == 3 else vector[None, :]


def _conv_forward(layer: Conv1dSpec, x: Tensor, weight: Tensor, bias: Tensor) -> tuple[Tensor, Tensor]:
    """Convolution as one matmul over unfolded windows; returns (output, unfolded columns)."""
    batch = x.shape[0]
    padded = np.pad(x, ((0, 0), (0, 0), (layer.padding, layer.padding)))
    # (batch, in_channels, out_length, kernel)
    windows = sliding_window_view(padded, layer.kernel_size, axis=2)[:, :, :: layer.stride, :]
    out_length = windows.shape[2]
    # (batch * out_length, in_channels * kernel)
    columns = windows.transpose(0, 2, 1, 3).reshape(batch * out_length, -1)
    out = columns @ weight.reshape(layer.out_channels, -1).T
    out = out.reshape(batch, out_length, layer.out_channels).transpose(0, 2, 1)
    return out + bias[None, :, None], columns


def _conv_backward(
    layer: Conv1dSpec, upstream: Tensor, columns: Tensor, weight: Tensor, input_length: int
) -> tuple[Tensor, Tensor, Tensor]:
    batch, _, out_length = upstream.shape
    channels = layer.in_channels
    flat_upstream = upstream.transpose(0, 2, 1).reshape(batch * out_length, layer.out_channels)
    grad_weight = (flat_upstream.T @ columns).reshape(weight.shape)
    grad_bias = upstream.sum(axis=(0, 2))
    grad_columns = flat_upstream @ weight.reshape(layer.out_channels, -1)
    grad_windows = grad_columns.reshape(batch, out_length, channels, layer.kernel_size).transpose(
        0, 2, 1, 3
    )

    grad_padded = np.zeros((batch, channels, input_length + 2 * layer.padding))
    span = layer.stride * (out_length - 1) + 1
    for k in range(layer.kernel_size):
        grad_padded[:, :, k : k + span : layer.stride] += grad_windows[..., k]
    grad_input = grad_padded[:, :, layer.padding : layer.padding + input_length]
    return grad_input, grad_weight, grad_bias


def forward(
    spec: ModelSpec,
    params: ParameterSet,
    batch: Tensor,
    mode: ForwardMode = ForwardMode.EVAL,
    rng: Optional[Rng] = None,
) -> tuple[Tensor, Optional[ForwardCache]]:
    """
    Run the network on a batch.

    Args:
        spec: Model specification
        params: Parameters; batch-norm running statistics are updated in train mode
        batch: b x d1 inputs
        mode: TRAIN uses batch statistics and samples dropout masks; EVAL uses
            running statistics and identity dropout
        rng: Required in train mode when a dropout layer has a positive rate

    Returns:
        (b x d2 predictions, cache in train mode else None)
    """
    mode = ForwardMode(mode)
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != spec.input_dim:
        raise ContractViolation(f"batch must be b x {spec.input_dim}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NumericError("network input contains NaN or Inf")

    train = mode is ForwardMode.TRAIN
    entries: list[dict[str, Any]] = []

    for index, layer in enumerate(spec.layers):
        prefix = f"{index}."
        entry: dict[str, Any] = {"input_shape": x.shape}

        if isinstance(layer, DenseSpec):
            entry["input"] = x
            x = x @ params.values[prefix + "weight"].T + params.values[prefix + "bias"]

        elif isinstance(layer, Conv1dSpec):
            if x.ndim == 2:
                x = x[:, None, :]
            x, columns = _conv_forward(
                layer, x, params.values[prefix + "weight"], params.values[prefix + "bias"]
            )
            entry["columns"] = columns

        elif isinstance(layer, BatchNorm1dSpec):
            axes = _bn_axes(x)
            if train:
                mean = x.mean(axis=axes)
                var = x.var(axis=axes)
                count = x.size // layer.channels
                unbiased = var * count / (count - 1) if count > 1 else var
                m = layer.momentum
                running_mean = params.state[prefix + "running_mean"]
                running_var = params.state[prefix + "running_var"]
                params.state[prefix + "running_mean"] = (1 - m) * running_mean + m * mean
                params.state[prefix + "running_var"] = (1 - m) * running_var + m * unbiased
            else:
                mean = params.state[prefix + "running_mean"]
                var = params.state[prefix + "running_var"]
            inv_std = 1.0 / np.sqrt(var + layer.epsilon)
            x_hat = (x - _bn_view(mean, x)) * _bn_view(inv_std, x)
            entry["x_hat"] = x_hat
            entry["inv_std"] = inv_std
            x = _bn_view(params.values[prefix + "gamma"], x) * x_hat + _bn_view(
                params.values[prefix + "beta"], x
            )

        elif isinstance(layer, ReluSpec):
            mask = x > 0
            entry["mask"] = mask
            x = x * mask

        elif isinstance(layer, MaxPool1dSpec):
            batch_size, channels, length = x.shape
            out_length = length // layer.window
            blocks = x[:, :, : out_length * layer.window].reshape(
                batch_size, channels, out_length, layer.window
            )
            argmax = np.argmax(blocks, axis=3)
            entry["argmax"] = argmax
            x = np.take_along_axis(blocks, argmax[..., None], axis=3)[..., 0]

        elif isinstance(layer, DropoutSpec):
            if train and layer.rate > 0:
                if rng is None:
                    raise ContractViolation("train-mode forward with dropout needs an rng")
                keep = rng.generator.random(x.shape) >= layer.rate
                scale = keep / (1.0 - layer.rate)
                entry["scale"] = scale
                x = x * scale

        elif isinstance(layer, FlattenSpec):
            x = x.reshape(x.shape[0], -1)

        entries.append(entry)

    if not np.all(np.isfinite(x)):
        raise NumericError("network output contains NaN or Inf")

    cache = ForwardCache(entries=entries, n_layers=len(spec.layers)) if train else None
    return x, cache


def backward(
    spec: ModelSpec,
    params: ParameterSet,
    cache: Optional[ForwardCache],
    upstream: Tensor,
) -> dict[str, Tensor]:
    """
    Backpropagate the loss gradient with respect to the predictions.

    Args:
        spec: Model specification used in the forward pass
        params: Parameters used in the forward pass
        cache: Cache from the immediately preceding train-mode forward
        upstream: b x d2 gradient of the loss with respect to the predictions

    Returns:
        Gradient for every learnable tensor, keyed like ``params.values``
    """
    if cache is None or cache.consumed:
        raise ContractViolation("backward needs the cache of a fresh train-mode forward")
    if cache.n_layers != len(spec.layers):
        raise ContractViolation("cache does not belong to this model spec")
    cache.consumed = True

    grad = np.asarray(upstream, dtype=np.float64)
    grads: dict[str, Tensor] = {}

    for index in reversed(range(len(spec.layers))):
        layer = spec.layers[index]
        entry = cache.entries[index]
        prefix = f"{index}."

        if isinstance(layer, DenseSpec):
            grads[prefix + "weight"] = grad.T @ entry["input"]
            grads[prefix + "bias"] = grad.sum(axis=0)
            grad = grad @ params.values[prefix + "weight"]

        elif isinstance(layer, Conv1dSpec):
            input_shape = entry["input_shape"]
            input_length = input_shape[-1]
            grad, grads[prefix + "weight"], grads[prefix + "bias"] = _conv_backward(
                layer, grad, entry["columns"], params.values[prefix + "weight"], input_length
            )
            grad = grad.reshape(input_shape)

        elif isinstance(layer, BatchNorm1dSpec):
            x_hat = entry["x_hat"]
            axes = _bn_axes(x_hat)
            count = x_hat.size // layer.channels
            grads[prefix + "gamma"] = (grad * x_hat).sum(axis=axes)
            grads[prefix + "beta"] = grad.sum(axis=axes)
            g_hat = grad * _bn_view(params.values[prefix + "gamma"], x_hat)
            sum_g = g_hat.sum(axis=axes, keepdims=True)
            sum_gx = (g_hat * x_hat).sum(axis=axes, keepdims=True)
            grad = (
                _bn_view(entry["inv_std"], x_hat) / count * (count * g_hat - sum_g - x_hat * sum_gx)
            )

        elif isinstance(layer, ReluSpec):
            grad = grad * entry["mask"]

        elif isinstance(layer, MaxPool1dSpec):
            batch_size, channels, length = entry["input_shape"]
            argmax = entry["argmax"]
            out_length = argmax.shape[2]
            blocks = np.zeros((batch_size, channels, out_length, layer.window))
            np.put_along_axis(blocks, argmax[..., None], grad[..., None], axis=3)
            full = np.zeros((batch_size, channels, length))
            full[:, :, : out_length * layer.window] = blocks.reshape(batch_size, channels, -1)
            grad = full

        elif isinstance(layer, DropoutSpec):
            if "scale" in entry:
                grad = grad * entry["scale"]

        elif isinstance(layer, FlattenSpec):
            grad = grad.reshape(entry["input_shape"])

    return grads


def predict(spec: ModelSpec, params: ParameterSet, features: Tensor) -> Tensor:
    """Eval-mode predictions."""
    predictions, _ = forward(spec, params, features, ForwardMode.EVAL)
    return predictions


# =============================================================================
# Parameter penalties
# =============================================================================


def param_penalty(
    params: ParameterSet,
    kind: PenaltyKind,
    strength: float,
) -> tuple[float, dict[str, Tensor]]:
    """
    L1 (s * sum|theta|) or L2 (s * sum theta^2) penalty over weights and kernels.

    Returns:
        (penalty value, gradient per penalized tensor)
    """
    if strength < 0:
        raise ContractViolation(f"penalty strength must be >= 0, got {strength}")
    kind = PenaltyKind(kind)
    value = 0.0
    grads: dict[str, Tensor] = {}
    for name in params.penalized_names():
        theta = params.values[name]
        if kind is PenaltyKind.L1:
            value += strength * float(np.abs(theta).sum())
            grads[name] = strength * np.sign(theta)
        else:
            value += strength * float(np.square(theta).sum())
            grads[name] = 2.0 * strength * theta
    return value, grads
