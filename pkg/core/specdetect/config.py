"""specdetect runtime configuration.

This module defines a frozen dataclass `Config` that centralizes process-wide
settings. Values come from environment variables (a local `.env` file is
honoured) with defaults taken from the `[tool.specdetect]` table of the
repository `pyproject.toml` when it is available.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
import tomllib
from pathlib import Path

from dotenv import load_dotenv

load_dotenv(override=False)


def load_specdetect_config() -> dict:
    pyproject = Path(__file__).resolve().parents[2] / "pyproject.toml"
    if not pyproject.exists():
        return {}
    with pyproject.open("rb") as f:
        data = tomllib.load(f)
    return data.get("tool", {}).get("specdetect", {})


_CONFIG = load_specdetect_config()
_GRID = _CONFIG.get("grid", {})

DEFAULT_DETECTOR = _CONFIG.get("default_detector", "label_free")


def _threads_from_env() -> int:
    raw = os.getenv("SPECDETECT_THREADS", "")
    try:
        value = int(raw) if raw else (os.cpu_count() or 1)
    except ValueError:
        value = 1
    return max(value, 1)


@dataclass(frozen=True)
class Config:  # pylint: disable=too-many-instance-attributes
    """Configuration for specdetect.

    Attributes:
        THREADS (int): Upper bound on worker threads for parallel stages.
        LOG_LEVEL (str): Root log level used by the CLI.
        DUMP_DIR (str): Default directory for intermediate matrix dumps.
        F_MIN (float): Default lowest wavenumber of the frequency grid (cm^-1).
        DELTA_F (float): Default wavenumber step (cm^-1).
        M (int): Default number of frequency bins.
        DELTA_T (float): Default exposure per spectrum (s).
        N (int): Default number of time samples.
    """
    THREADS: int = _threads_from_env()
    LOG_LEVEL: str = os.getenv("SPECDETECT_LOG_LEVEL", "WARNING").upper()
    DUMP_DIR: str = os.getenv("SPECDETECT_DUMP_DIR", "intermediate")

    # Grid defaults for synthesized experiments.
    F_MIN: float = float(_GRID.get("f_min", 400.0))
    DELTA_F: float = float(_GRID.get("delta_f", 2.0))
    M: int = int(_GRID.get("m", 700))
    DELTA_T: float = float(_GRID.get("delta_t", 0.2))
    N: int = int(_GRID.get("n", 100))
