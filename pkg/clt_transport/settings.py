"""
Runtime settings for clt_transport.

Values come from (in order of precedence) explicit keyword arguments to the
numerical functions, CLT_* environment variables, the project .env file and
the defaults below.
"""

from functools import lru_cache
from pathlib import Path

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent
CONFIG_DIR = Path(__file__).resolve().parent / "config"


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_prefix="CLT_",
        env_file=str(BASE_DIR / ".env"),
        extra="ignore",
    )

    # Lattice laws
    mass_tolerance: float = Field(1e-12, ge=0.0)
    max_convolution_pairs: int = Field(10_000_000, gt=0)
    # log-mass below which tail atoms of a LogLattice are cut off
    tail_log_floor: float = Field(-10_000.0, lt=-800.0)

    # Cumulants
    cumulant_order_cap: int = Field(16, ge=2)
    cancellation_flag: float = Field(1e12, gt=0.0)

    # Transport
    oracle_max_atoms: int = Field(200, gt=0)
    orlicz_rel_tol: float = Field(1e-6, gt=0.0)
    orlicz_abs_floor: float = Field(1e-9, gt=0.0)
    objective_tol: float = Field(1e-9, gt=0.0)
    quantile_clip: float = Field(1e-14, gt=0.0, lt=0.5)
    levy_tol: float = Field(1e-9, gt=0.0)
    w1_cross_check_abs: float = Field(1e-8, gt=0.0)
    w1_cross_check_rel: float = Field(1e-6, gt=0.0)

    # Sweeps and reports
    workers: int = Field(1, ge=1)
    log_dir: str = "logs"
    report_digits: int = Field(12, ge=1, le=17)


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Return the process-wide settings instance."""
    return Settings()
