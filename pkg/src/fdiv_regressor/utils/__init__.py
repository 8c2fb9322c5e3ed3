"""Persistence helpers for trained models and CSV reports."""

from .serialization import (
    SavedModel,
    save_model,
    load_model,
    # CSV reports
    write_train_report,
    write_comparison,
    write_sweep_table,
    write_runs_table,
)

__all__ = [
    "SavedModel",
    "save_model",
    "load_model",
    # CSV reports
    "write_train_report",
    "write_comparison",
    "write_sweep_table",
    "write_runs_table",
]
