"""
Runtime Configuration Module for renewlab

Environment-level settings (thread count, log level, output root, default gate
slack, Monte Carlo block size). Values come from the process environment with
the RENEWLAB_ prefix, and a .env file in the working directory is honoured.
Per-experiment parameters live in schemas.ExperimentConfig instead.
"""

from functools import lru_cache
from pathlib import Path

from dotenv import load_dotenv
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

# Load environment variables from .env file
load_dotenv()


class RuntimeSettings(BaseSettings):
    """
    Process-wide settings read from the environment.

    Attributes:
        threads: Worker threads for Monte Carlo blocks and experiment cells
        log_level: Root logging level used by the command line
        output_root: Directory under which run directories are created
        gate_slack: Multiplier applied to every acceptance tolerance
        block_size: Samples per Monte Carlo block (fixes the RNG stream layout)
    """

    model_config = SettingsConfigDict(env_prefix="RENEWLAB_", extra="ignore")

    threads: int = Field(default=4, ge=1, description="Worker thread count")
    log_level: str = Field(default="INFO", description="Logging level name")
    output_root: Path = Field(default=Path("runs"), description="Root for run directories")
    gate_slack: float = Field(default=1.0, gt=0, description="Tolerance multiplier")
    block_size: int = Field(
        default=2**18, ge=1024, description="Monte Carlo samples per RNG block"
    )


@lru_cache(maxsize=1)
def get_settings() -> RuntimeSettings:
    """
    Return the cached runtime settings.

    Returns:
        RuntimeSettings: Settings resolved from environment and .env file
    """
    return RuntimeSettings()
