"""
Runtime settings for the copyless verifier.
Values come from the environment (optionally a .env file) and can be
overridden per command by CLI flags.
"""

import logging
import os
from typing import Literal

from dotenv import load_dotenv
from pydantic import BaseModel, Field

logger = logging.getLogger(__name__)


def _env_bool(name: str, default: bool) -> bool:
    value = os.getenv(name)
    if value is None:
        return default
    return value.strip().lower() in ("1", "true", "yes", "on")


class Settings(BaseModel):
    """Defaults shared by the CLI and the MCP server."""

    log_level: str = "INFO"
    max_steps: int = Field(default=10_000, gt=0)
    loop_bound: int = Field(default=2, gt=0)
    max_depth: int = Field(default=10_000, gt=0)
    state_budget: int = Field(default=1_000_000, gt=0)
    search_budget: int = Field(default=10_000, gt=0)
    singsharp: bool = False
    strict_contracts: bool = True
    reception: Literal["fifo", "lookahead"] = "fifo"

    @classmethod
    def from_env(cls) -> "Settings":
        """
        Build settings from environment variables.

        Returns:
            Settings populated from LOG_LEVEL and COPYLESS_* variables
        """
        load_dotenv()
        settings = cls(
            log_level=os.getenv("LOG_LEVEL", "INFO"),
            max_steps=int(os.getenv("COPYLESS_MAX_STEPS", "10000")),
            loop_bound=int(os.getenv("COPYLESS_LOOP_BOUND", "2")),
            max_depth=int(os.getenv("COPYLESS_MAX_DEPTH", "10000")),
            state_budget=int(os.getenv("COPYLESS_STATE_BUDGET", "1000000")),
            search_budget=int(os.getenv("COPYLESS_SEARCH_BUDGET", "10000")),
            singsharp=_env_bool("COPYLESS_SINGSHARP", False),
            strict_contracts=_env_bool("COPYLESS_STRICT_CONTRACTS", True),
            reception=os.getenv("COPYLESS_RECEPTION", "fifo").strip().lower(),
        )
        logger.debug(f"Loaded settings: {settings.model_dump()}")
        return settings
