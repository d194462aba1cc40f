"""
Environment-driven settings for AngleSage
"""
import os
from pathlib import Path

from dotenv import load_dotenv
from pydantic import BaseModel, Field, field_validator

# Load environment variables from project root
project_root = Path(__file__).parent.parent
dotenv_path = project_root / '.env'
load_dotenv(dotenv_path=dotenv_path)

LOG_FORMATS = ("console", "json")


class Settings(BaseModel):
    out_dir: Path = Path("runs")
    log_level: str = "INFO"
    log_format: str = "console"
    workers: int = Field(default=1, ge=1)

    @field_validator("log_level")
    @classmethod
    def _upper_level(cls, value: str) -> str:
        return value.upper()

    @field_validator("log_format")
    @classmethod
    def _known_format(cls, value: str) -> str:
        value = value.lower()
        if value not in LOG_FORMATS:
            raise ValueError(f"log format must be one of {LOG_FORMATS}")
        return value

    @classmethod
    def from_env(cls) -> "Settings":
        """Build settings from ANGLESAGE_* environment variables (already merged with .env)"""
        return cls(
            out_dir=Path(os.getenv("ANGLESAGE_OUT_DIR", "runs")),
            log_level=os.getenv("ANGLESAGE_LOG_LEVEL", "INFO"),
            log_format=os.getenv("ANGLESAGE_LOG_FORMAT", "console"),
            workers=int(os.getenv("ANGLESAGE_WORKERS", "1")),
        )
