"""Model JSON persistence and CSV report writers."""

import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np
import pandas as pd
from pydantic import ValidationError

from ..errors import DataLoadError
from ..evaluation import ComparisonRow
from ..models import ModelSpec, Scaler, SweepResult, TrainReport
from ..network import ParameterSet, init_params
from ..numerics import Rng

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

FORMAT_VERSION = 1
STATE_SUFFIXES = (".running_mean", ".running_var")
CSV_FLOAT_FORMAT = "%.17g"
T_STATISTIC_LIMIT = 1e300


@dataclass
class SavedModel:
    """Everything needed to reproduce a trained model's predictions."""

    spec: ModelSpec
    params: ParameterSet
    scaler: Optional[Scaler] = None
    feature_names: list[str] = field(default_factory=list)
    target_names: list[str] = field(default_factory=list)
    # Target columns in the training CSV and the one selected, if any
    n_targets: Optional[int] = None
    target_index: Optional[int] = None

    @property
    def csv_targets(self) -> int:
        """Trailing target columns a data file for this model carries."""
        return self.n_targets if self.n_targets is not None else self.spec.output_dim


def _atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    temp_path = path.with_suffix(path.suffix + ".tmp")
    try:
        with open(temp_path, "w", encoding="utf-8") as f:
            f.write(text)
        os.replace(temp_path, path)
    except Exception:
        if temp_path.exists():
            temp_path.unlink()
        raise


def _encode_tensor(array: np.ndarray) -> dict[str, Any]:
    return {"shape": list(array.shape), "data": array.ravel(order="C").tolist()}


def _decode_tensor(name: str, entry: dict[str, Any]) -> np.ndarray:
    try:
        shape = tuple(int(s) for s in entry["shape"])
        data = np.asarray(entry["data"], dtype=np.float64)
        return data.reshape(shape, order="C")
    except (KeyError, TypeError, ValueError) as e:
        raise DataLoadError(f"malformed tensor '{name}': {e}") from e


def save_model(model: SavedModel, path: PathLike) -> Path:
    """
    Write a model as one JSON document (atomic write).

    Floats are written with Python's shortest round-trip repr, so reloading
    reproduces every parameter bit for bit.

    Returns:
        Path to the written file
    """
    path = Path(path)
    tensors = {**model.params.values, **model.params.state}
    document = {
        "format_version": FORMAT_VERSION,
        "spec": model.spec.model_dump(mode="json"),
        "params": {name: _encode_tensor(tensors[name]) for name in sorted(tensors)},
        "scaler": model.scaler.model_dump() if model.scaler is not None else None,
        "feature_names": model.feature_names,
        "target_names": model.target_names,
        "n_targets": model.n_targets,
        "target_index": model.target_index,
    }
    _atomic_write_text(path, json.dumps(document, indent=2, allow_nan=False) + "\n")
    logger.info(f"Saved model to {path}")
    return path


def load_model(path: PathLike) -> SavedModel:
    """
    Read a model JSON document written by ``save_model``.

    Raises:
        DataLoadError: Missing file, invalid JSON, or tensors that do not
            match the layer specification
    """
    path = Path(path)
    if not path.is_file():
        raise DataLoadError("model file not found", path=str(path))
    try:
        with open(path, "r", encoding="utf-8") as f:
            document = json.load(f)
        spec = ModelSpec.model_validate(document["spec"])
        scaler = (
            Scaler.model_validate(document["scaler"])
            if document.get("scaler") is not None
            else None
        )
        raw_params = document["params"]
        n_targets = _optional_int(document.get("n_targets"))
        target_index = _optional_int(document.get("target_index"))
    except (json.JSONDecodeError, KeyError, TypeError, ValidationError) as e:
        raise DataLoadError(f"invalid model document: {e}", path=str(path)) from e

    params = ParameterSet()
    for name, entry in raw_params.items():
        tensor = _decode_tensor(name, entry)
        target = params.state if name.endswith(STATE_SUFFIXES) else params.values
        target[name] = tensor

    _check_param_shapes(spec, params, path)
    _check_target_columns(spec, n_targets, target_index, path)
    return SavedModel(
        spec=spec,
        params=params,
        scaler=scaler,
        feature_names=list(document.get("feature_names", [])),
        target_names=list(document.get("target_names", [])),
        n_targets=n_targets,
        target_index=target_index,
    )


def _optional_int(value: Any) -> Optional[int]:
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, int):
        raise TypeError(f"expected an integer or null, got {value!r}")
    return value


def _check_target_columns(
    spec: ModelSpec, n_targets: Optional[int], target_index: Optional[int], path: Path
) -> None:
    columns = n_targets if n_targets is not None else spec.output_dim
    if target_index is None:
        if columns != spec.output_dim:
            raise DataLoadError(
                f"n_targets {columns} differs from the model's {spec.output_dim} outputs",
                path=str(path),
            )
        return
    if spec.output_dim != 1 or not 0 <= target_index < columns:
        raise DataLoadError(
            f"target_index {target_index} is inconsistent with n_targets {columns} "
            f"and {spec.output_dim} outputs",
            path=str(path),
        )


def _check_param_shapes(spec: ModelSpec, params: ParameterSet, path: Path) -> None:
    # Shapes a freshly initialized network would have
    reference = init_params(spec, Rng(0))
    for group, expected in (("params", reference.values), ("state", reference.state)):
        actual = params.values if group == "params" else params.state
        if set(actual) != set(expected):
            missing = sorted(set(expected) - set(actual))
            extra = sorted(set(actual) - set(expected))
            raise DataLoadError(
                f"{group} names do not match the model (missing {missing}, extra {extra})",
                path=str(path),
            )
        for name, tensor in expected.items():
            if actual[name].shape != tensor.shape:
                raise DataLoadError(
                    f"tensor '{name}' has shape {actual[name].shape}, expected {tensor.shape}", path=str(path)
                )


# =============================================================================
# CSV reports
# =============================================================================


def _write_frame(frame: pd.DataFrame, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)
    logger.info(f"Wrote {len(frame)} rows to {path}")
    return path


def write_train_report(report: TrainReport, path: PathLike) -> Path:
    """Per-epoch table with columns epoch, train_loss, val_mse."""
    frame = pd.DataFrame(
        {
            "epoch": np.arange(1, len(report.val_mse) + 1),
            "train_loss": report.train_loss,
            "val_mse": report.val_mse,
        }
    )
    return _write_frame(frame, path)


def write_comparison(rows: list[ComparisonRow], path: PathLike) -> Path:
    """
    Numeric comparison table with columns target, rmse_a, rmse_b, t, p, verdict.

    ``target`` is 1-based with 0 for the all-targets row. An infinite t from
    a degenerate test is written as +/-1e300 so the file still loads as
    numeric data.
    """
    limit = T_STATISTIC_LIMIT
    frame = pd.DataFrame.from_records(
        [
            {
                "target": row.target,
                "rmse_a": row.rmse_a,
                "rmse_b": row.rmse_b,
                "t": float(np.clip(row.test.t, -limit, limit)),
                "p": row.test.p,
                "verdict": row.verdict,
            }
            for row in rows
        ],
        columns=["target", "rmse_a", "rmse_b", "t", "p", "verdict"],
    )
    return _write_frame(frame, path)


def write_sweep_table(result: SweepResult, path: PathLike, score_name: str = "test_rmse") -> Path:
    """
    Per-configuration table with columns config_index, best_val_mse, best_epoch.

    A ``score_name`` column is added when every row carries a score.
    """
    columns = {
        "config_index": [row.config_index for row in result.rows],
        "best_val_mse": [row.best_val_mse for row in result.rows],
        "best_epoch": [row.best_epoch for row in result.rows],
    }
    if all(row.score is not None for row in result.rows):
        columns[score_name] = [row.score for row in result.rows]
    frame = pd.DataFrame(columns)
    return _write_frame(frame, path)


def write_runs_table(test_rmse: list[float], path: PathLike) -> Path:
    """Repeated-run summary with columns run, test_rmse."""
    frame = pd.DataFrame({"run": np.arange(len(test_rmse)), "test_rmse": test_rmse})
    return _write_frame(frame, path)
