import json
from pathlib import Path
from typing import Any, List, Optional, Union

from pydantic_settings import BaseSettings

from backend.core.domain import gbit_to_gb


class Settings(BaseSettings):
    """Engine configuration settings."""

    # Logging
    LOG_LEVEL: str = "INFO"

    # Input files (None = packaged defaults / synthesis)
    REGIONS_PATH: Optional[str] = None
    RTT_PATH: Optional[str] = None
    PRICES_PATH: Optional[str] = None

    # Simulation
    PERIODS: int = 24
    PERIOD_LENGTH_HOURS: float = 1.0
    THRESHOLDS_MS: List[float] = [8.8, 60.0, 120.0, 171.0, 220.0, 371.0]
    VIDEO_SIZE_GBIT: float = 0.738
    VIDEO_DURATION_PERIODS: int = 4

    # RTT synthesis
    BASE_RTT_MS: float = 8.8
    RTT_MS_PER_KM: float = 0.02

    # Pricing
    HOURS_PER_MONTH: float = 730.0
    CHARGE_BROADCASTER_MIGRATION: bool = False

    # Optimizer
    KNAPSACK_RESOLUTION_MS: float = 0.1
    KNAPSACK_MAX_REFINEMENTS: int = 3

    # Feature encoding
    HASH_DIM_NAME: int = 64
    HASH_DIM_CATEGORY: int = 32
    HASH_SEED: int = 0

    # Random forest
    FOREST_TREES: int = 30
    FOREST_MAX_DEPTH: Optional[int] = None
    FOREST_MIN_SAMPLES_LEAF: int = 1
    FOREST_FEATURE_SUBSAMPLE: str = "sqrt"
    TRAIN_FRACTION: float = 0.8

    # Workload generator
    GEN_VIDEOS_PER_PERIOD: float = 30.0
    GEN_POPULARITY: float = 1.5
    GEN_LOCALITY: float = 0.6
    GEN_BROADCASTERS: int = 60
    GEN_MIN_VIEWERS: int = 50
    GEN_MAX_VIEWERS: int = 2000
    GEN_NOISE: float = 0.3

    # Run
    SEED: int = 0
    JOBS: int = 1

    @property
    def video_size_gb(self) -> float:
        return gbit_to_gb(self.VIDEO_SIZE_GBIT)

    @property
    def feature_subsample(self) -> Union[float, str]:
        """FOREST_FEATURE_SUBSAMPLE as a heuristic name or a fraction."""
        try:
            return float(self.FOREST_FEATURE_SUBSAMPLE)
        except ValueError:
            return self.FOREST_FEATURE_SUBSAMPLE

    class Config:
        env_file = ".env"


def load_settings(path: Optional[Union[str, Path]] = None, **overrides: Any) -> Settings:
    """
    Build Settings with precedence: overrides > JSON file > environment/.env > defaults.

    Keys of the JSON file and of ``overrides`` match field names case-insensitively;
    overrides set to None are ignored.

    Raises:
        FileNotFoundError: if ``path`` does not exist
        ValueError: on a non-object file or an unknown key
    """
    values = {}
    if path is not None:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
        if not isinstance(raw, dict):
            raise ValueError(f"Config file {path} must hold a JSON object")
        values.update(raw)

    values.update({k: v for k, v in overrides.items() if v is not None})

    normalized = {}
    for key, value in values.items():
        name = key.upper()
        if name not in Settings.model_fields:
            raise ValueError(f"Unknown setting '{key}'")
        normalized[name] = value
    return Settings(**normalized)
