from functools import lru_cache
from pathlib import Path
from typing import Annotated, Literal, Optional

from pydantic import AfterValidator, Field
from pydantic_settings import BaseSettings, SettingsConfigDict


def log_level_after(log_level: str) -> str:
    return log_level.upper()


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_prefix="MODSPACE_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    log_level: Annotated[str, AfterValidator(log_level_after)] = "INFO"
    log_format: Literal["console", "json"] = "console"

    # Worker cap for FFTs and tau-slice pools; None lets scipy/executors decide
    threads: Optional[int] = Field(default=None, ge=1)

    output_dir: Path = Path("results")

    # Global time horizon for flows and propagations
    t_max: float = Field(default=16.0, gt=0)


@lru_cache
def get_settings() -> Settings:
    return Settings()
