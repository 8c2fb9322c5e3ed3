"""Tests for model persistence and the CSV report writers."""

import json

import numpy as np
import pytest

from src.fdiv_regressor.data import load_csv
from src.fdiv_regressor.errors import DataLoadError
from src.fdiv_regressor.evaluation import compare_predictions
from src.fdiv_regressor.models import (
    ForwardMode,
    Scaler,
    SweepResult,
    SweepRow,
    TrainConfig,
    TrainReport,
)
from src.fdiv_regressor.network import build_mlp, forward, init_params, predict
from src.fdiv_regressor.numerics import Rng
from src.fdiv_regressor.utils import (
    SavedModel,
    load_model,
    save_model,
    write_comparison,
    write_runs_table,
    write_sweep_table,
    write_train_report,
)


@pytest.fixture
def saved_cnn(tmp_path, small_cnn, spectra):
    """A CNN whose running statistics have moved, saved to disk."""
    params = init_params(small_cnn, Rng(0))
    forward(small_cnn, params, spectra.X[:8], ForwardMode.TRAIN)
    model = SavedModel(
        spec=small_cnn,
        params=params,
        scaler=Scaler(mean=[0.5] * 16, std=[2.0] * 16),
        feature_names=spectra.feature_names,
        target_names=spectra.target_names,
    )
    path = save_model(model, tmp_path / "models" / "cnn.json")
    return model, path


class TestModelJson:
    """Tests for saving and loading models."""

    def test_round_trip_is_exact(self, saved_cnn, spectra):
        model, path = saved_cnn
        loaded = load_model(path)
        assert loaded.spec == model.spec
        assert loaded.scaler == model.scaler
        assert loaded.target_names == spectra.target_names
        for group in ("values", "state"):
            original = getattr(model.params, group)
            restored = getattr(loaded.params, group)
            assert set(restored) == set(original)
            for name in original:
                np.testing.assert_array_equal(restored[name], original[name])
        np.testing.assert_array_equal(
            predict(loaded.spec, loaded.params, spectra.X), predict(model.spec, model.params, spectra.X)
        )

    def test_document_layout(self, saved_cnn):
        _, path = saved_cnn
        document = json.loads(path.read_text(encoding="utf-8"))
        assert document["format_version"] == 1
        assert document["params"]["0.weight"]["shape"] == [32, 1, 5]
        assert "1.running_var" in document["params"]
        assert not path.with_suffix(".json.tmp").exists()

    def test_save_is_deterministic(self, saved_cnn, tmp_path):
        model, path = saved_cnn
        second = save_model(model, tmp_path / "again.json")
        assert second.read_bytes() == path.read_bytes()

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataLoadError):
            load_model(tmp_path / "missing.json")

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(DataLoadError):
            load_model(path)

    def test_shape_mismatch(self, saved_cnn):
        _, path = saved_cnn
        document = json.loads(path.read_text(encoding="utf-8"))
        document["params"]["0.bias"] = {"shape": [31], "data": [0.0] * 31}
        path.write_text(json.dumps(document), encoding="utf-8")
        with pytest.raises(DataLoadError) as exc_info:
            load_model(path)
        assert "0.bias" in str(exc_info.value)

    def test_missing_tensor(self, saved_cnn):
        _, path = saved_cnn
        document = json.loads(path.read_text(encoding="utf-8"))
        del document["params"]["13.weight"]
        path.write_text(json.dumps(document), encoding="utf-8")
        with pytest.raises(DataLoadError):
            load_model(path)

    def test_target_selection_round_trip(self, tmp_path):
        """A single-target model remembers which CSV column it was trained on."""
        spec = build_mlp([16, 4, 1])
        model = SavedModel(spec=spec, params=init_params(spec, Rng(0)), n_targets=3, target_index=2)
        loaded = load_model(save_model(model, tmp_path / "one.json"))
        assert loaded.n_targets == 3
        assert loaded.target_index == 2
        assert loaded.csv_targets == 3

    def test_documents_without_target_selection(self, saved_cnn):
        """Older documents default to one CSV target column per output."""
        _, path = saved_cnn
        document = json.loads(path.read_text(encoding="utf-8"))
        del document["n_targets"], document["target_index"]
        path.write_text(json.dumps(document), encoding="utf-8")
        loaded = load_model(path)
        assert loaded.target_index is None
        assert loaded.csv_targets == 2

    @pytest.mark.parametrize("n_targets, target_index", [(3, 3), (3, None), (2.5, 0)])
    def test_inconsistent_target_selection(self, tmp_path, n_targets, target_index):
        spec = build_mlp([16, 4, 1])
        path = save_model(SavedModel(spec=spec, params=init_params(spec, Rng(0))), tmp_path / "m.json")
        document = json.loads(path.read_text(encoding="utf-8"))
        document.update(n_targets=n_targets, target_index=target_index)
        path.write_text(json.dumps(document), encoding="utf-8")
        with pytest.raises(DataLoadError):
            load_model(path)


class TestReports:
    """Tests for the CSV report writers; every report reloads as numeric data."""

    def test_train_report(self, tmp_path):
        report = TrainReport(train_loss=[3.0, 2.0], val_mse=[2.5, 2.75], best_epoch=1, best_val_mse=2.5)
        path = write_train_report(report, tmp_path / "report.csv")
        table = load_csv(path, n_targets=1)
        np.testing.assert_array_equal(table.X[:, 0], [1, 2])
        np.testing.assert_array_equal(table.Y[:, 0], [2.5, 2.75])

    def test_comparison_with_degenerate_test(self, tmp_path):
        """An infinite t is clipped to a large finite value."""
        targets = np.zeros((3, 1))
        preds_a = np.ones((3, 1))
        preds_b = 2.0 * np.ones((3, 1))
        rows = compare_predictions(preds_a, preds_b, targets)
        assert all(row.test.degenerate for row in rows)
        path = write_comparison(rows, tmp_path / "compare.csv")
        table = load_csv(path, n_targets=1)
        assert table.feature_names == ["target", "rmse_a", "rmse_b", "t", "p"]
        np.testing.assert_array_equal(table.X[:, 0], [1, 0])
        assert table.X[0, 3] == pytest.approx(-1e300)
        np.testing.assert_array_equal(table.Y[:, 0], [-1, -1])

    def test_sweep_table(self, tmp_path):
        rows = [
            SweepRow(config_index=0, label="none", best_val_mse=1.0, best_epoch=3, score=2.0),
            SweepRow(config_index=1, label="l2=0.001", best_val_mse=0.5, best_epoch=4, score=1.5),
        ]
        result = SweepResult(best_index=1, best_config=TrainConfig(), rows=rows)
        table = load_csv(write_sweep_table(result, tmp_path / "sweep.csv"), n_targets=1)
        assert table.target_names == ["test_rmse"]
        np.testing.assert_array_equal(table.Y[:, 0], [2.0, 1.5])

    def test_sweep_table_without_scores(self, tmp_path):
        rows = [SweepRow(config_index=0, label="none", best_val_mse=1.0, best_epoch=3)]
        result = SweepResult(best_index=0, best_config=TrainConfig(), rows=rows)
        table = load_csv(write_sweep_table(result, tmp_path / "sweep.csv"), n_targets=1)
        assert table.target_names == ["best_epoch"]

    def test_runs_table(self, tmp_path):
        table = load_csv(write_runs_table([0.5, 0.25], tmp_path / "runs.csv"), n_targets=1)
        np.testing.assert_array_equal(table.X[:, 0], [0, 1])
        np.testing.assert_array_equal(table.Y[:, 0], [0.5, 0.25])
