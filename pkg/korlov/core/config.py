# korlov/core/config.py

from __future__ import annotations

from pathlib import Path
from typing import Optional, TYPE_CHECKING

from pydantic_settings import BaseSettings, SettingsConfigDict

from korlov.core.errors import InvalidInputError

if TYPE_CHECKING:
    from korlov.services.exactlin import Field


BASE_DIR = Path(__file__).resolve().parents[2]
ENV_PATH = BASE_DIR / ".env"

TOOL_VERSION = "0.4.0"


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_file=str(ENV_PATH),
        env_prefix="KORLOV_",
        extra="ignore",
    )

    DEBUG: bool = False
    TOOL_VERSION: str = TOOL_VERSION

    # -------------------------
    # Ground field
    # -------------------------
    # KORLOV_FIELD wins over the "field" tag of every input document.
    FIELD: Optional[str] = None
    DEFAULT_PRIME: int = 32003

    def get_field_override(self) -> Optional["Field"]:
        if not self.FIELD or not self.FIELD.strip():
            return None
        from korlov.services.exactlin import Field

        return Field.parse(self.FIELD, default_prime=self.DEFAULT_PRIME)

    # -------------------------
    # Certification / stabilization
    # -------------------------
    STABILIZATION_WINDOW: int = 3
    CERTIFICATION_TAIL: int = 3

    def get_stabilization_window(self, override: Optional[int] = None) -> int:
        w = override if override is not None else self.STABILIZATION_WINDOW
        if w < 1:
            raise InvalidInputError(f"stabilization window must be >= 1, got {w}")
        return w

    # -------------------------
    # Workers
    # -------------------------
    THREADS: int = 1

    def get_threads(self, override: Optional[int] = None) -> int:
        n = override if override is not None else self.THREADS
        return max(1, int(n))


settings = Settings()
