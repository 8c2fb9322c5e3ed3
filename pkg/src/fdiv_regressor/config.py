"""Configuration settings for the f-divergence regression toolkit.

Values come from constructor keywords first, then from the shipped
``defaults.json`` (training defaults and the published hyperparameter
grids). Environment variables are not a source.
"""

from pathlib import Path

from pydantic_settings import (
    BaseSettings,
    JsonConfigSettingsSource,
    PydanticBaseSettingsSource,
    SettingsConfigDict,
)

DEFAULTS_FILE = Path(__file__).with_name("defaults.json")


class Settings(BaseSettings):
    """Toolkit settings loaded from the shipped defaults file."""

    # Logging
    log_level: str = "INFO"

    # Training defaults
    epochs: int = 500
    batch_size: int = 16
    learning_rate: float = 1.0
    softmax_scale: float = 2.0

    # Adadelta constants
    adadelta_rho: float = 0.95
    adadelta_epsilon: float = 1e-6

    # Evaluation
    significance_level: float = 0.1

    # Feature preprocessing (targets are never standardized)
    standardize_features: bool = True

    # Hyperparameter grids for the regularization sweeps
    l1_strengths: list[float] = []
    l2_strengths: list[float] = []
    dropout_rates: list[float] = []
    fdiv_pairs: list[tuple[float, float]] = []  # (w, gamma)

    # Strength groups for f-divergence combined with a standard regularizer
    combination_strengths: list[float] = []
    combination_dropout_rates: list[float] = []

    model_config = SettingsConfigDict(
        json_file=DEFAULTS_FILE,
        json_file_encoding="utf-8",
        extra="ignore",
    )

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> tuple[PydanticBaseSettingsSource, ...]:
        return (init_settings, JsonConfigSettingsSource(settings_cls))


settings = Settings()
