from functools import lru_cache
from pathlib import Path
from typing import Optional

from pydantic import model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

# Get the project root directory (parent of the package directory)
PROJECT_ROOT = Path(__file__).parent.parent


class Settings(BaseSettings):
    """Process-level settings layered from the environment and dotenv files (later files win)."""

    model_config = SettingsConfigDict(
        env_prefix="AMI_",
        env_file=(
            PROJECT_ROOT / ".env",
            PROJECT_ROOT / ".env.local",
            PROJECT_ROOT / ".env.development.local",
            ".env",
            ".env.local",
            ".env.development.local",
        ),
        extra="ignore",
    )

    out: Path = Path("runs")
    database_url: Optional[str] = None
    log_level: str = "INFO"
    log_json: bool = False

    @model_validator(mode="after")
    def default_database_url(self) -> "Settings":
        if not self.database_url:
            self.database_url = f"sqlite:///{(self.out / 'registry.db').as_posix()}"
        return self


@lru_cache
def get_settings() -> Settings:
    return Settings()
