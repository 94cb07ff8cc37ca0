"""
Configuration module for the MAP burstiness analyzer
"""
from pathlib import Path
from typing import List

from dotenv import load_dotenv
from pydantic_settings import BaseSettings, SettingsConfigDict

# Load environment variables
load_dotenv()

# Project paths
PROJECT_ROOT = Path(__file__).parent.parent
LOGS_DIR = PROJECT_ROOT / "logs"


class Settings(BaseSettings):
    """Application settings loaded from environment variables"""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_prefix="MAPBURST_",
        case_sensitive=False,
        extra="ignore",
    )

    # Application Configuration
    environment: str = "development"
    log_level: str = "INFO"
    log_to_file: bool = False
    log_dir: Path = LOGS_DIR

    # Linear algebra kernel tolerances
    solve_residual_tolerance: float = 1e-10
    singular_pivot_tolerance: float = 1e-13
    stationary_residual_tolerance: float = 1e-12
    stochastic_row_tolerance: float = 1e-10
    cross_check_tolerance: float = 1e-10
    identity_tolerance: float = 1e-9

    # Model validation
    row_sum_tolerance: float = 1e-12
    probability_sum_tolerance: float = 1e-12

    # Property verdicts
    verdict_tolerance: float = 1e-12
    hard_violation_threshold: float = 1e-9
    max_reported_moment: int = 3

    # Default time grid (start, stop, step)
    grid_start: float = 0.0
    grid_stop: float = 10.0
    grid_step: float = 0.2

    # Randomized sweeps
    sweep_instances: int = 10_000
    full_scale_instances: int = 1_000_000
    sweep_orders: List[int] = [3, 4, 5, 6]
    sweep_workers: int = 1
    default_seed: int = 1

    # Monte Carlo simulation
    sim_events: int = 1_000_000
    sim_batches: int = 50
    sim_min_samples: int = 1_000
    mixing_tolerance: float = 1e-6
    survival_floor: float = 1e-300


# Global settings instance
settings = Settings()
