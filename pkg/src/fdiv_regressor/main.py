"""Command-line entry point.

Subcommands:
    divergence  Henze-Penrose divergence between two point files
    train       Train a network with optional regularizers and sweeps
    evaluate    Per-target and overall RMSE of a saved model
    compare     RMSEs of two models with paired t-tests
    simulate    Grid-search simulation on the noisy quadratic

Exit codes: 0 success, 1 usage or contract error, 2 data or file error,
3 numeric failure.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, NoReturn, Optional, Sequence

import numpy as np
from pydantic import ValidationError

from .config import settings
from .data import TabularDataset, load_csv, load_points, prepare_splits, standardize_apply
from .divergence import LabeledPointSet, hp_divergence_exact, hp_divergence_smoothed
from .errors import ContractViolation, DataLoadError, NumericError
from .evaluation import compare_predictions, rmse
from .models import LossKind, ModelSpec, OptimizerKind, SimConfig, TrainConfig
from .network import ParameterSet, build_mlp, build_spectral_cnn, predict
from .numerics import Rng
from .simulation import run_simulation, write_frequency_csv
from .train import (
    combination_configs,
    effective_spec,
    grid_configs,
    hyperparameter_sweep,
    train,
)
from .utils import (
    SavedModel,
    load_model,
    save_model,
    write_comparison,
    write_runs_table,
    write_sweep_table,
    write_train_report,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

SPLIT_STREAM = 3
SWEEP_KINDS = ("l1", "l2", "dropout", "fdiv", "fdiv+l1", "fdiv+l2", "fdiv+dropout")
COMBINATION_PREFIX = "fdiv+"


class UsageError(Exception):
    """Bad command-line input detected by the parser."""


class ArgumentParser(argparse.ArgumentParser):
    """Parser that reports usage errors through an exception instead of exiting with 2."""

    def error(self, message: str) -> NoReturn:
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage().strip()}")


def configure_logging(verbose: bool = False, quiet: bool = False) -> None:
    if verbose:
        level = logging.DEBUG
    elif quiet:
        level = logging.WARNING
    else:
        level = getattr(logging, settings.log_level.upper())
    logging.basicConfig(
        level=level,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
        force=True,
    )


# =============================================================================
# Flag parsing helpers
# =============================================================================


def parse_reg(text: str) -> dict[str, Any]:
    """
    Parse one ``--reg`` value into TrainConfig updates.

    Accepted forms: ``none``, ``l1:S``, ``l2:S``, ``dropout:P`` and
    ``fdiv:w=W,gamma=G[,lambda=L]``.
    """
    text = text.strip()
    if text == "none":
        return {}
    kind, _, value = text.partition(":")
    try:
        if kind in ("l1", "l2"):
            return {"loss": {f"{kind}_strength": float(value)}}
        if kind == "dropout":
            return {"dropout_rate": float(value)}
        if kind == "fdiv":
            fields = dict(item.split("=", 1) for item in value.split(",") if item)
            unknown = set(fields) - {"w", "gamma", "lambda"}
            if unknown or not {"w", "gamma"} <= set(fields):
                raise ValueError(f"expected w=W,gamma=G[,lambda=L], got '{value}'")
            loss = {"w": float(fields["w"]), "gamma": float(fields["gamma"])}
            if "lambda" in fields:
                loss["lambda"] = float(fields["lambda"])
            return {"loss": loss}
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"invalid --reg '{text}': {e}") from e
    raise argparse.ArgumentTypeError(
        f"invalid --reg '{text}' (expected none, l1:S, l2:S, dropout:P or fdiv:w=W,gamma=G[,lambda=L])"
    )


def parse_arch(text: str) -> tuple[str, list[int]]:
    """``cnn`` or ``mlp:W1,W2,...`` (hidden widths)."""
    if text == "cnn":
        return "cnn", []
    kind, _, widths = text.partition(":")
    if kind == "mlp":
        try:
            hidden = [int(w) for w in widths.split(",") if w]
        except ValueError as e:
            raise argparse.ArgumentTypeError(f"invalid --arch '{text}': {e}") from e
        if any(w < 1 for w in hidden):
            raise argparse.ArgumentTypeError(f"invalid --arch '{text}': widths must be >= 1")
        return "mlp", hidden
    raise argparse.ArgumentTypeError(f"invalid --arch '{text}' (expected cnn or mlp:W1,W2,...)")


def build_train_config(args: argparse.Namespace) -> TrainConfig:
    payload: dict[str, Any] = {
        "epochs": args.epochs,
        "batch_size": args.batch,
        "lr": args.lr,
        "seed": args.seed,
        "optimizer": args.optimizer,
        "loss": {"lambda": settings.softmax_scale},
    }
    for update in args.reg or []:
        payload["loss"].update(update.get("loss", {}))
        if "dropout_rate" in update:
            payload["dropout_rate"] = update["dropout_rate"]
    return TrainConfig.model_validate(payload)


def build_model_spec(arch: tuple[str, list[int]], d1: int, d2: int, dropout: float) -> ModelSpec:
    kind, hidden = arch
    if kind == "cnn":
        return build_spectral_cnn(d1, d2, dropout=dropout)
    return build_mlp([d1, *hidden, d2], dropout=dropout)


def _suffixed(path: Path, suffix: str, extension: str) -> Path:
    return path.with_name(f"{path.stem}{suffix}{extension}")


def _print_rmse_table(names: list[str], per_target: list[float], overall: float) -> None:
    width = max([len(n) for n in names] + [7])
    print(f"{'target':<{width}}  rmse")
    for name, value in zip(names, per_target):
        print(f"{name:<{width}}  {value:.6g}")
    print(f"{'overall':<{width}}  {overall:.6g}")


# =============================================================================
# Subcommands
# =============================================================================


def cmd_divergence(args: argparse.Namespace) -> int:
    sets = LabeledPointSet(load_points(args.a), load_points(args.b))
    if args.smoothed:
        report = hp_divergence_smoothed(sets, args.lam)
    else:
        report = hp_divergence_exact(sets)
    print(f"estimator: {report.estimator.value}")
    print(f"n0: {report.n0}")
    print(f"n1: {report.n1}")
    print(f"cut_mass: {report.cut_mass:.6f}")
    print(f"d_raw: {report.d_raw:.6f}")
    print(f"d_clamped: {report.d_clamped:.6f}")
    return EXIT_OK


def sweep_configs(kind: str, base: TrainConfig) -> list[TrainConfig]:
    """Candidate configurations for a --sweep value."""
    if kind.startswith(COMBINATION_PREFIX):
        return combination_configs(kind[len(COMBINATION_PREFIX) :], base)
    return grid_configs(kind, base)


def _train_once(
    args: argparse.Namespace,
    dataset: TabularDataset,
    spec: ModelSpec,
    cfg: TrainConfig,
    split_seed: int,
    out: Path,
) -> float:
    prepared = prepare_splits(dataset, Rng(split_seed).substream(SPLIT_STREAM), args.standardize)
    test = prepared.test

    def test_rmse(trained_spec: ModelSpec, params: ParameterSet) -> float:
        return rmse(predict(trained_spec, params, test.X), test.Y).overall

    if args.sweep:
        configs = sweep_configs(args.sweep, cfg)
        result, params, report = hyperparameter_sweep(
            spec, prepared.dataset, prepared.indices, configs, seed=cfg.seed, score=test_rmse
        )
        cfg = result.best_config
        write_sweep_table(result, _suffixed(out, "_sweep", ".csv"))
        print(f"sweep winner: config {result.best_index} ({cfg.describe()})")
    else:
        params, report = train(spec, prepared.dataset, prepared.indices, cfg)

    trained_spec = effective_spec(spec, cfg)
    save_model(
        SavedModel(
            spec=trained_spec,
            params=params,
            scaler=prepared.scaler,
            feature_names=dataset.feature_names,
            target_names=dataset.target_names,
            n_targets=args.targets,
            target_index=args.target_index,
        ),
        out,
    )
    write_train_report(report, _suffixed(out, "_report", ".csv"))

    evaluation = rmse(predict(trained_spec, params, test.X), test.Y)
    print(f"best epoch: {report.best_epoch}  best val mse: {report.best_val_mse:.6g}")
    print(f"test rmse ({evaluation.n_samples} rows):")
    _print_rmse_table(dataset.target_names, evaluation.per_target, evaluation.overall)
    return evaluation.overall


def cmd_train(args: argparse.Namespace) -> int:
    dataset = load_csv(args.data, args.targets)
    if args.target_index is not None:
        dataset = dataset.select_target(args.target_index)
    cfg = build_train_config(args)

    needs_dropout = (cfg.dropout_rate or 0) > 0 or (args.sweep or "").endswith("dropout")
    placeholder = cfg.dropout_rate or (settings.dropout_rates[0] if settings.dropout_rates else 0.1)
    spec = build_model_spec(args.arch, dataset.d1, dataset.d2, placeholder if needs_dropout else 0.0)

    out = Path(args.out)
    if args.runs == 1:
        _train_once(args, dataset, spec, cfg, cfg.seed, out)
        return EXIT_OK

    results = []
    for run in range(args.runs):
        run_seed = cfg.seed + run
        split_seed = cfg.seed if args.fixed_split else run_seed
        print(f"== run {run} (seed {run_seed}) ==")
        run_cfg = cfg.model_copy(update={"seed": run_seed})
        run_out = _suffixed(out, f"_run{run:02d}", out.suffix)
        results.append(_train_once(args, dataset, spec, run_cfg, split_seed, run_out))
    write_runs_table(results, _suffixed(out, "_runs", ".csv"))
    print(f"mean test rmse over {args.runs} runs: {float(np.mean(results)):.6g}")
    return EXIT_OK


def _model_predictions(model: SavedModel, path: str) -> tuple[TabularDataset, np.ndarray]:
    dataset = load_csv(path, model.csv_targets)
    if model.target_index is not None:
        dataset = dataset.select_target(model.target_index)
    if dataset.d1 != model.spec.input_dim:
        raise DataLoadError(
            f"{dataset.d1} feature columns, the model expects {model.spec.input_dim}", path=path
        )
    X = standardize_apply(model.scaler, dataset.X) if model.scaler is not None else dataset.X
    return dataset, predict(model.spec, model.params, X)


def cmd_evaluate(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    dataset, preds = _model_predictions(model, args.data)
    report = rmse(preds, dataset.Y)
    names = model.target_names or dataset.target_names
    print(f"rows: {report.n_samples}")
    _print_rmse_table(names, report.per_target, report.overall)
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    model_a = load_model(args.model_a)
    model_b = load_model(args.model_b)
    if model_a.spec.output_dim != model_b.spec.output_dim:
        raise ContractViolation(
            f"models predict {model_a.spec.output_dim} and {model_b.spec.output_dim} targets"
        )
    if model_a.target_index != model_b.target_index:
        raise ContractViolation(
            f"models were trained on target columns {model_a.target_index} and {model_b.target_index}"
        )
    dataset, preds_a = _model_predictions(model_a, args.data)
    _, preds_b = _model_predictions(model_b, args.data)
    rows = compare_predictions(preds_a, preds_b, dataset.Y, dataset.target_names, args.level)

    verdicts = {-1: "A better", 0: "no difference", 1: "B better"}
    level = rows[0].test.level
    print(f"{'target':<12} {'rmse_a':>10} {'rmse_b':>10} {'t':>10} {'p':>8}  verdict (level {level:g})")
    for row in rows:
        print(
            f"{row.name:<12} {row.rmse_a:>10.5g} {row.rmse_b:>10.5g} "
            f"{row.test.t:>10.4g} {row.test.p:>8.4f}  {verdicts[row.verdict]}"
        )
    if args.out:
        write_comparison(rows, args.out)
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = SimConfig(
        runs=args.runs, seed=args.seed, sigma=args.sigma, n_points=args.n_points, gamma=args.gamma
    )
    maps = run_simulation(cfg)
    for kind in (LossKind.MSE, LossKind.FDIV):
        freq = maps[kind]
        print(f"{kind.value} frequency map (rows a, columns b):")
        print("      " + " ".join(f"{b:>5.2f}" for b in freq.b_values))
        for a, row in zip(freq.a_values, freq.counts):
            print(f"{a:>5.2f} " + " ".join(f"{c:>5d}" for c in row))
        print(f"{kind.value} hits at ({cfg.a_true}, {cfg.b_true}): {freq.hits(cfg.a_true, cfg.b_true)}")
    write_frequency_csv(maps, args.out)
    return EXIT_OK


# =============================================================================
# Parser
# =============================================================================


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(
        prog="fdiv-regress",
        description="f-divergence regularized multi-target regression",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--verbose", action="store_true", help="Debug logging")
    common.add_argument("--quiet", action="store_true", help="Warnings and errors only")

    sub = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)

    p = sub.add_parser("divergence", parents=[common], help="Divergence between two point files")
    p.add_argument("--a", required=True, help="CSV of the first point set (targets)")
    p.add_argument("--b", required=True, help="CSV of the second point set (predictions)")
    p.add_argument("--smoothed", action="store_true", help="Use the softmax-smoothed estimator")
    p.add_argument("--lambda", dest="lam", type=float, default=settings.softmax_scale, help="Softmax scale")
    p.set_defaults(handler=cmd_divergence)

    p = sub.add_parser("train", parents=[common], help="Train a network")
    p.add_argument("--data", required=True, help="Training CSV (features then targets)")
    p.add_argument("--targets", required=True, type=int, help="Number of trailing target columns")
    p.add_argument(
        "--reg",
        action="append",
        type=parse_reg,
        help="none | l1:S | l2:S | dropout:P | fdiv:w=W,gamma=G[,lambda=L] (repeatable)",
    )
    p.add_argument("--epochs", type=int, default=settings.epochs)
    p.add_argument("--batch", type=int, default=settings.batch_size)
    p.add_argument("--lr", type=float, default=settings.learning_rate)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--optimizer",
        choices=[k.value for k in OptimizerKind],
        default=OptimizerKind.ADADELTA.value,
    )
    p.add_argument("--out", default="model.json", help="Model JSON path")
    p.add_argument("--arch", type=parse_arch, default=("cnn", []), help="cnn or mlp:W1,W2,...")
    p.add_argument(
        "--sweep",
        choices=SWEEP_KINDS,
        help="Sweep the published grid of one regularizer; fdiv+KIND crosses KIND with the fdiv pairs",
    )
    p.add_argument("--runs", type=int, default=1, help="Repeat training with seeds seed..seed+runs-1")
    p.add_argument("--fixed-split", action="store_true", help="Keep the base seed's split for every run")
    p.add_argument("--target-index", type=int, help="Train on this target column only (0-based)")
    p.add_argument(
        "--no-standardize",
        dest="standardize",
        action="store_false",
        default=settings.standardize_features,
        help="Use raw features",
    )
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("evaluate", parents=[common], help="RMSE of a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("compare", parents=[common], help="Paired comparison of two saved models")
    p.add_argument("--model-a", required=True)
    p.add_argument("--model-b", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--level", type=float, default=settings.significance_level)
    p.add_argument("--out", help="Optional CSV for the comparison table")
    p.set_defaults(handler=cmd_compare)

    defaults = SimConfig()
    p = sub.add_parser("simulate", parents=[common], help="Grid-search simulation")
    p.add_argument("--runs", type=int, default=defaults.runs)
    p.add_argument("--seed", type=int, default=defaults.seed)
    p.add_argument("--sigma", type=float, default=defaults.sigma)
    p.add_argument("--n-points", type=int, default=defaults.n_points)
    p.add_argument("--gamma", type=float, default=defaults.gamma)
    p.add_argument("--out", default="frequency.csv")
    p.set_defaults(handler=cmd_simulate)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the CLI and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(str(e), file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:
        # --help
        return int(e.code or 0)

    configure_logging(args.verbose, args.quiet)
    try:
        if getattr(args, "runs", 1) < 1:
            raise ContractViolation(f"--runs must be >= 1, got {args.runs}")
        return args.handler(args)
    except (ContractViolation, ValidationError) as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {_one_line(e)}", file=sys.stderr)
        return EXIT_USAGE
    except DataLoadError as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {_one_line(e)}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {_one_line(e)}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {_one_line(e)}", file=sys.stderr)
        return EXIT_DATA


def _one_line(error: Exception) -> str:
    return " ".join(str(error).split())


if __name__ == "__main__":
    sys.exit(main())
