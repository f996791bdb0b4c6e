from __future__ import annotations

from functools import lru_cache
from typing import Literal

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_prefix="CIRCMEAN_FBP_",
        case_sensitive=False,
    )

    environment: Literal["local", "development", "ci"] = "local"
    app_name: str = "circmean-fbp"

    log_level: str = "INFO"
    log_json: bool = True
    metrics_textfile: str | None = None

    # Thread pool for the pixel-parallel kernels (back-projection, adjoint).
    workers: int = Field(default=1, ge=1)
    pixel_chunk: int = Field(default=4096, ge=64)

    gauss_legendre_order: int = Field(default=4, ge=2, le=16)
    circle_quad_n: int = Field(default=256, ge=16)
    keyident_quad_n: int = Field(default=65536, ge=64)

    # Adjoint reconstructions need long traces: T_max = factor * R0.
    adjoint_tmax_factor: float = Field(default=20.0, ge=1.0)
    laplacian_interp_order: Literal[1, 3] = 3
    # Gaussian mollifier width, in samples, applied to data before filtering; 0 disables it.
    data_smoothing: float = Field(default=0.0, ge=0.0)


@lru_cache
def get_settings() -> Settings:
    return Settings()
