from __future__ import annotations

from functools import lru_cache
from typing import Literal

from pydantic_settings import BaseSettings, SettingsConfigDict

NegativityPolicy = Literal["clamp", "abort", "offset-warn"]
BoundMode = Literal["paper", "consistent"]


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_prefix="OVERAIR_",
        case_sensitive=False,
        extra="ignore",
    )

    # Monte Carlo defaults
    default_seed: int = 20240101
    default_horizon: int = 10_000
    workers: int = 1

    # Trace output
    trace_thin_threshold: int = 10_000
    output_dir: str = "runs"

    # Protocol policy
    negativity_policy: NegativityPolicy = "clamp"
    division_guard: float = 1e-30

    # Topology certification
    connectivity_tol: float = 1e-9
    certification_retries: int = 100

    # Analysis
    bound_mode: BoundMode = "consistent"
    eigen_tol: float = 1e-10
    moment_gate_se: float = 3.0

    # Logging
    log_level: str = "INFO"
    log_format: Literal["json", "console"] = "json"

    def thin_stride(self, horizon: int) -> int:
        if horizon <= self.trace_thin_threshold:
            return 1
        return -(-horizon // self.trace_thin_threshold)


@lru_cache
def get_settings() -> Settings:
    return Settings()
