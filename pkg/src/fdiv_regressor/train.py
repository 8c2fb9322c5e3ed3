"""Minibatch training with the regularized objective and best-validation checkpointing."""

import logging
from typing import Callable, Optional, Sequence

import numpy as np

from .config import settings
from .data import TabularDataset
from .errors import ContractViolation, NumericError
from .loss import combined_loss
from .models import (
    ForwardMode,
    LossConfig,
    ModelSpec,
    PenaltyKind,
    SplitIndices,
    SweepResult,
    SweepRow,
    TrainConfig,
    TrainReport,
)
from .network import (
    ParameterSet,
    backward,
    forward,
    init_params,
    param_penalty,
    predict,
    with_dropout_rate,
)
from .numerics import Rng
from .optim import Optimizer

logger = logging.getLogger(__name__)

INIT_STREAM = 0
SHUFFLE_STREAM = 1
DROPOUT_STREAM = 2


def effective_spec(spec: ModelSpec, cfg: TrainConfig) -> ModelSpec:
    """The model spec a configuration actually trains (dropout override applied)."""
    if cfg.dropout_rate is None:
        return spec
    return with_dropout_rate(spec, cfg.dropout_rate)


def batch_partition(order: np.ndarray, batch_size: int, merge_singleton: bool) -> list[np.ndarray]:
    """
    Cut a shuffled index order into consecutive batches of ``batch_size``.

    The last batch may be smaller. With ``merge_singleton`` a trailing batch
    of one row is appended to the batch before it.
    """
    batches = [order[start : start + batch_size] for start in range(0, len(order), batch_size)]
    if merge_singleton and len(batches) > 1 and len(batches[-1]) == 1:
        logger.debug("Merging singleton trailing batch into its predecessor")
        tail = batches.pop()
        batches[-1] = np.concatenate([batches[-1], tail])
    return batches


def validate_mse(
    spec: ModelSpec,
    params: ParameterSet,
    dataset: TabularDataset,
    indices: Optional[Sequence[int]] = None,
) -> float:
    """Eval-mode MSE over the selected rows, averaged over every target entry."""
    rows = np.arange(dataset.n) if indices is None else np.asarray(indices, dtype=int)
    if rows.size == 0:
        raise ContractViolation("validation needs at least one row")
    preds = predict(spec, params, dataset.X[rows])
    return float(np.mean((preds - dataset.Y[rows]) ** 2))


def _penalties(params: ParameterSet, loss: LossConfig) -> tuple[float, dict[str, np.ndarray]]:
    total = 0.0
    grads: dict[str, np.ndarray] = {}
    for kind, strength in ((PenaltyKind.L1, loss.l1_strength), (PenaltyKind.L2, loss.l2_strength)):
        if strength <= 0:
            continue
        value, penalty_grads = param_penalty(params, kind, strength)
        total += value
        for name, grad in penalty_grads.items():
            grads[name] = grads[name] + grad if name in grads else grad
    return total, grads


def train(
    spec: ModelSpec,
    dataset: TabularDataset,
    splits: SplitIndices,
    cfg: TrainConfig,
) -> tuple[ParameterSet, TrainReport]:
    """
    Train a network and return the parameters with the lowest validation MSE.

    Each epoch shuffles the training rows, walks them in batches, adds the
    L1/L2 penalties to the batch objective, backpropagates and steps the
    optimizer; then the validation MSE is computed in eval mode. Ties keep
    the earlier epoch.

    Args:
        spec: Network specification
        dataset: Full dataset (features already scaled)
        splits: Row indices into ``dataset``
        cfg: Training configuration

    Returns:
        (best parameters, training report)

    Raises:
        ContractViolation: Empty train or validation split
        NumericError: Non-finite batch objective, with epoch and batch numbers
    """
    if not splits.train or not splits.val:
        raise ContractViolation("train and validation splits must be nonempty")
    if dataset.d1 != spec.input_dim or dataset.d2 != spec.output_dim:
        raise ContractViolation(
            f"dataset is {dataset.d1} -> {dataset.d2} but the model is {spec.input_dim} -> {spec.output_dim}"
        )
    spec = effective_spec(spec, cfg)

    rng = Rng(cfg.seed)
    params = init_params(spec, rng.substream(INIT_STREAM))
    shuffle_rng = rng.substream(SHUFFLE_STREAM)
    dropout_rng = rng.substream(DROPOUT_STREAM)
    optimizer = Optimizer(cfg.optimizer, params, cfg.lr)

    train_rows = np.asarray(splits.train, dtype=int)
    if cfg.loss.w > 0 and len(train_rows) < 2:
        raise ContractViolation("the f-divergence regularizer needs at least 2 training rows")
    if cfg.loss.w > 0 and len(train_rows) % cfg.batch_size == 1 and len(train_rows) > 1:
        logger.warning(
            f"{len(train_rows)} training rows leave a singleton last batch; it joins the previous batch"
        )

    report = TrainReport()
    best_params = params.copy()
    logger.info(
        f"Training {cfg.describe()} for {cfg.epochs} epochs on {len(train_rows)} rows (seed {cfg.seed})"
    )

    for epoch in range(1, cfg.epochs + 1):
        order = train_rows[shuffle_rng.generator.permutation(len(train_rows))]
        batches = batch_partition(order, cfg.batch_size, merge_singleton=cfg.loss.w > 0)
        epoch_loss = 0.0

        for batch_index, rows in enumerate(batches, start=1):
            try:
                preds, cache = forward(spec, params, dataset.X[rows], ForwardMode.TRAIN, dropout_rng)
                result = combined_loss(preds, dataset.Y[rows], cfg.loss)
            except NumericError as e:
                raise NumericError(str(e), epoch=epoch, batch=batch_index) from e
            penalty, penalty_grads = _penalties(params, cfg.loss)
            value = result.value + penalty
            if not np.isfinite(value):
                raise NumericError("training loss is not finite", epoch=epoch, batch=batch_index)

            grads = backward(spec, params, cache, result.grad)
            for name, grad in penalty_grads.items():
                grads[name] = grads[name] + grad
            optimizer.step(params, grads)
            epoch_loss += value
            logger.debug(f"epoch {epoch} batch {batch_index}: loss={value:.6g} mse={result.mse:.6g}")

        try:
            val_mse = validate_mse(spec, params, dataset, splits.val)
        except NumericError as e:
            raise NumericError(str(e), epoch=epoch, batch=len(batches)) from e
        if not np.isfinite(val_mse):
            raise NumericError("validation MSE is not finite", epoch=epoch, batch=len(batches))
        report.train_loss.append(epoch_loss / len(batches))
        report.val_mse.append(val_mse)
        if val_mse < report.best_val_mse:
            report.best_val_mse = val_mse
            report.best_epoch = epoch
            best_params = params.copy()
        report.best_val_history.append(report.best_val_mse)

        if epoch == 1 or epoch % 50 == 0 or epoch == cfg.epochs:
            logger.info(
                f"epoch {epoch}/{cfg.epochs}: train_loss={report.train_loss[-1]:.6g} "
                f"val_mse={val_mse:.6g} best={report.best_val_mse:.6g}@{report.best_epoch}"
            )

    return best_params, report


ScoreFn = Callable[[ModelSpec, ParameterSet], float]


def hyperparameter_sweep(
    spec: ModelSpec,
    dataset: TabularDataset,
    splits: SplitIndices,
    configs: Sequence[TrainConfig],
    seed: Optional[int] = None,
    score: Optional[ScoreFn] = None,
) -> tuple[SweepResult, ParameterSet, TrainReport]:
    """
    Train every configuration with one shared seed and keep the lowest validation MSE.

    Args:
        spec: Network specification
        dataset: Full dataset
        splits: Row indices into ``dataset``
        configs: Candidate configurations (at least one)
        seed: Seed applied to every configuration; defaults to the first config's seed
        score: Optional extra metric recorded per configuration (e.g. test RMSE);
            it never affects the selection

    Returns:
        (sweep table and winner, winner's parameters, winner's report)
    """
    if not configs:
        raise ContractViolation("hyperparameter sweep needs at least one configuration")
    shared_seed = configs[0].seed if seed is None else seed

    rows: list[SweepRow] = []
    best: Optional[tuple[int, ParameterSet, TrainReport]] = None
    for index, cfg in enumerate(configs):
        cfg = cfg.model_copy(update={"seed": shared_seed})
        params, report = train(spec, dataset, splits, cfg)
        rows.append(
            SweepRow(
                config_index=index,
                label=cfg.describe(),
                best_val_mse=report.best_val_mse,
                best_epoch=report.best_epoch,
                score=score(effective_spec(spec, cfg), params) if score is not None else None,
            )
        )
        if best is None or report.best_val_mse < best[2].best_val_mse:
            best = (index, params, report)

    assert best is not None
    best_index, best_params, best_report = best
    logger.info(
        f"Sweep winner: config {best_index} ({rows[best_index].label}) "
        f"val_mse={best_report.best_val_mse:.6g}"
    )
    result = SweepResult(
        best_index=best_index,
        best_config=configs[best_index].model_copy(update={"seed": shared_seed}),
        rows=rows,
    )
    return result, best_params, best_report


# =============================================================================
# Published hyperparameter grids
# =============================================================================


def _with_loss(base: TrainConfig, **updates: float) -> TrainConfig:
    # Validate so the batch-size rule is checked against the new loss
    payload = base.model_dump()
    payload["loss"] = {**base.loss.model_dump(), **updates}
    return TrainConfig.model_validate(payload)


def grid_configs(kind: str, base: TrainConfig) -> list[TrainConfig]:
    """
    One configuration per published grid value of a regularizer, layered on ``base``.

    Args:
        kind: "l1", "l2", "dropout" or "fdiv"
        base: Configuration supplying every other setting
    """
    if kind == "l1":
        return [_with_loss(base, l1_strength=s) for s in settings.l1_strengths]
    if kind == "l2":
        return [_with_loss(base, l2_strength=s) for s in settings.l2_strengths]
    if kind == "dropout":
        return [base.model_copy(update={"dropout_rate": p}) for p in settings.dropout_rates]
    if kind == "fdiv":
        return [_with_loss(base, w=w, gamma=gamma) for w, gamma in settings.fdiv_pairs]
    raise ContractViolation(f"unknown sweep kind '{kind}' (expected l1, l2, dropout or fdiv)")


def combination_configs(kind: str, base: TrainConfig) -> list[TrainConfig]:
    """
    A standard regularizer's strength group crossed with every (w, gamma) pair.

    Args:
        kind: "l1", "l2" or "dropout"
        base: Configuration supplying every other setting
    """
    if kind in ("l1", "l2"):
        standard = [_with_loss(base, **{f"{kind}_strength": s}) for s in settings.combination_strengths]
    elif kind == "dropout":
        standard = [
            base.model_copy(update={"dropout_rate": p}) for p in settings.combination_dropout_rates
        ]
    else:
        raise ContractViolation(f"unknown combination kind '{kind}' (expected l1, l2 or dropout)")
    return [cfg for std in standard for cfg in grid_configs("fdiv", std)]
