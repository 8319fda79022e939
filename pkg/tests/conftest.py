"""Pytest configuration.

These tests are designed to work both when specdetect is installed (editable
or wheel) and when running directly from a source checkout.

In a clean checkout the `specdetect` package lives under `core/`. Add that
directory to `sys.path` so `pytest` can import it without requiring an
editable install.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np
import pytest


def pytest_configure() -> None:
    """Configure sys.path for local-source test runs."""

    repo_root = Path(__file__).resolve().parents[1]

    core_dir = repo_root / "core"
    s = str(core_dir)
    if s not in sys.path:
        sys.path.insert(0, s)


REPO_ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture
def amino_acids_path() -> Path:
    return REPO_ROOT / "configs" / "amino_acids.json"


@pytest.fixture
def small_grids():
    from specdetect.model.types import FrequencyGrid, TimeGrid

    return TimeGrid(delta_t=0.2, n=60), FrequencyGrid(f_min=400.0, delta_f=2.0, m=200)


@pytest.fixture
def two_analytes():
    """Two analytes with disjoint windows on the small grids, two lines each."""
    from specdetect.model.types import AnalyteSpec, ElutionWindow, PseudoVoigtPeak

    return [
        AnalyteSpec(
            name="a",
            peaks=(
                PseudoVoigtPeak(center=500.0, amplitude=3.0, sigma2=16.0),
                PseudoVoigtPeak(center=640.0, amplitude=2.0, sigma2=16.0),
            ),
            window=ElutionWindow(origin=1.0, duration=1.0, rise=1.0, fall=1.0),
            quantity=100.0,
        ),
        AnalyteSpec(
            name="b",
            peaks=(
                PseudoVoigtPeak(center=560.0, amplitude=3.0, sigma2=16.0),
                PseudoVoigtPeak(center=720.0, amplitude=2.5, sigma2=16.0),
            ),
            window=ElutionWindow(origin=6.0, duration=1.0, rise=1.0, fall=1.0),
            quantity=80.0,
        ),
    ]


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


SMALL_EXPERIMENT = {
    "time_grid": {"delta_t": 0.2, "n": 60},
    "frequency_grid": {"f_min": 400.0, "delta_f": 2.0, "m": 200},
    "analytes": [
        {
            "name": "a",
            "quantity": 100.0,
            "window": {"origin": 1.0, "duration": 1.0, "rise": 1.0, "fall": 1.0},
            "peaks": [
                {"center": 500.0, "amplitude": 3.0, "sigma2": 16.0},
                {"center": 640.0, "amplitude": 2.0, "sigma2": 16.0},
            ],
        },
        {
            "name": "b",
            "quantity": 80.0,
            "window": {"origin": 6.0, "duration": 1.0, "rise": 1.0, "fall": 1.0},
            "peaks": [
                {"center": 560.0, "amplitude": 3.0, "sigma2": 16.0},
                {"center": 720.0, "amplitude": 2.5, "sigma2": 16.0},
            ],
        },
    ],
    "solvent": {"peaks": [{"center": 770.0, "amplitude": 200.0, "sigma2": 40.0}], "level": 1.0},
    "noise": {"gaussian_sigma": 0.2},
    "clamp": False,
    "seed": 3,
}


@pytest.fixture
def small_experiment():
    from specdetect.schemas import ExperimentConfig

    return ExperimentConfig.model_validate(SMALL_EXPERIMENT)


@pytest.fixture
def small_experiment_path(tmp_path) -> Path:
    path = tmp_path / "experiment.json"
    path.write_text(json.dumps(SMALL_EXPERIMENT), encoding="utf-8")
    return path
