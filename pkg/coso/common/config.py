from functools import lru_cache

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Toolkit configuration loaded from COSO_* environment variables."""

    model_config = SettingsConfigDict(
        env_prefix="COSO_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    app_name: str = "coso"
    log_level: str = "WARNING"

    # Enumeration caps
    # Bell(12) is about 4.2M partitions; anything past that is not a desk computation.
    exhaustive_limit: int = 12
    # Fusion-family search is 2^(blocks) per segment, blocks <= |V| - 1.
    par_max_users: int = 16
    # validate_plan uses the brute-force complimentary oracle up to this |V|,
    # the PSP sufficiency test above it.
    complimentary_bruteforce_limit: int = 8

    # Source models
    default_field: int = 2

    # Packet simulator
    sim_field: int = 256
    sim_candidate_budget: int = 64  # coded-row candidates tried per transmission
    sim_stage_attempts: int = 4  # deterministic re-seeds before a stage counts as failed


@lru_cache
def get_settings() -> Settings:
    return Settings()
