"""Limit-of-detection sweep over concentration scalings."""
from __future__ import annotations

import asyncio
import logging
from pathlib import Path
from typing import Any

import numpy as np

from specdetect.config import DEFAULT_DETECTOR
from specdetect.detectors import load_detector
from specdetect.exceptions import ConfigError
from specdetect.io import write_json, write_table
from specdetect.metrics import PLOT_COLUMNS, emit_detection_plot_data, lod_sweep
from specdetect.model.forward import synthesize
from specdetect.runtime import derive_seed
from specdetect.schemas import ExperimentConfig, PipelineConfig, load_experiment, load_pipeline_config
from specdetect.tools.base import ToolResult, overrides, require, tool_result

logger = logging.getLogger(__name__)

DEFAULT_ETA_STEPS = 8
DEFAULT_ETA_SPAN = 20.0


def eta_grid(quantities: np.ndarray, eta_min: float | None, eta_max: float | None, steps: int | None) -> np.ndarray:
    """Geometric grid of scalings.

    Without explicit bounds it runs from ||q|| / 20 up to ||q||, where q are
    the experiment's quantities, so the top point reproduces the document.

    Raises:
        ConfigError: For non-positive or inverted bounds, or fewer than one step.
    """
    steps = DEFAULT_ETA_STEPS if steps is None else int(steps)
    top = float(np.linalg.norm(quantities)) if eta_max is None else float(eta_max)
    bottom = top / DEFAULT_ETA_SPAN if eta_min is None else float(eta_min)
    if steps < 1:
        raise ConfigError(f"eta grid needs at least one step, got {steps}")
    if bottom <= 0 or top <= 0:
        raise ConfigError(f"eta bounds must be positive, got [{bottom}, {top}]")
    if steps == 1:
        return np.array([top])
    if bottom >= top:
        raise ConfigError(f"eta_min ({bottom}) must be below eta_max ({top})")
    return np.geomspace(bottom, top, steps)


def _direction(arguments: dict[str, Any], quantities: np.ndarray) -> np.ndarray:
    raw = arguments.get("c_direction")
    c = quantities if raw is None else np.asarray(raw, dtype=float)
    norm = float(np.linalg.norm(c))
    if norm == 0:
        raise ConfigError("concentration direction is zero")
    # A user-supplied direction is taken as relative concentrations.
    return c / norm


def _plot_rows(
    experiment: ExperimentConfig, detector: Any, config: PipelineConfig, c: np.ndarray, eta: float, seed: int
) -> list[dict[str, Any]]:
    gt, gf = experiment.grids()
    solvent = experiment.solvent_spec()
    scaled = [a.with_quantity(float(eta * ck)) for a, ck in zip(experiment.analyte_specs(), c)]
    y = synthesize(scaled, solvent, experiment.noise.to_domain(), gt, gf, derive_seed(seed, "lod.plot"),
                   clamp=experiment.clamp, config_hash=experiment.config_hash())
    result = detector(y, solvent, config)
    return emit_detection_plot_data(scaled, result, gf, gt)


class LodTool:
    """Sweeps eta, writes the LodCurve JSON and the overlay table at the LOD."""

    @staticmethod
    def get_definition() -> dict[str, Any]:
        return {
            "name": "lod",
            "description": "Estimate the limit of detection along a relative concentration direction.",
            "inputSchema": {
                "type": "object",
                "properties": {
                    "config": {"type": "string", "description": "Experiment JSON path."},
                    "pipeline": {"type": "string", "description": "Pipeline settings JSON."},
                    "overrides": {"type": "object"},
                    "detector": {"type": "string"},
                    "c_direction": {"type": "array", "items": {"type": "number"}},
                    "eta_min": {"type": "number"},
                    "eta_max": {"type": "number"},
                    "eta_steps": {"type": "integer"},
                    "threshold": {"type": "number"},
                    "trials": {"type": "integer"},
                    "seed": {"type": "integer"},
                    "out": {"type": "string", "description": "LodCurve JSON path."},
                    "plot_out": {"type": "string", "description": "Plot CSV path (default: next to out)."},
                },
                "required": ["config", "out"],
            },
        }

    async def call(self, arguments: dict[str, Any]) -> ToolResult:
        return await asyncio.to_thread(self._run, arguments)

    @staticmethod
    def _run(arguments: dict[str, Any]) -> ToolResult:
        experiment = load_experiment(require(arguments, "config"))
        if not experiment.analytes:
            raise ConfigError("an LOD sweep needs at least one analyte")
        config = load_pipeline_config(arguments.get("pipeline")).with_overrides(**overrides(arguments))
        detector_name = arguments.get("detector") or DEFAULT_DETECTOR
        detector = load_detector(detector_name)
        seed = int(arguments["seed"]) if arguments.get("seed") is not None else experiment.seed

        quantities = np.array([a.quantity for a in experiment.analytes])
        c = _direction(arguments, quantities)
        etas = eta_grid(quantities, arguments.get("eta_min"), arguments.get("eta_max"), arguments.get("eta_steps"))
        threshold = float(arguments["threshold"]) if arguments.get("threshold") is not None else 0.9
        trials = int(arguments["trials"]) if arguments.get("trials") is not None else 10

        curve = lod_sweep(experiment, c, etas, detector, threshold=threshold, trials=trials, seed=seed,
                          config=config)
        out = write_json(require(arguments, "out"), {**curve.to_dict(), "detector": detector_name, "seed": seed})

        plot_eta = curve.eta_star if curve.eta_star is not None else float(etas[-1])
        plot_out = Path(arguments.get("plot_out") or Path(out).with_suffix(".plot.csv"))
        rows = _plot_rows(experiment, detector, config, c, plot_eta, seed)
        write_table(plot_out, rows, PLOT_COLUMNS)

        eta_star = "not-found" if curve.eta_star is None else curve.eta_star
        evidence = {
            "out": str(out),
            "plot_out": str(plot_out),
            "etas": curve.etas.tolist(),
            "rhos": curve.rhos.tolist(),
            "eta_star": eta_star,
            "plot_eta": plot_eta,
            "detector": detector_name,
        }
        text = f"LOD along c={np.round(c, 4).tolist()}: eta*={eta_star} (threshold {threshold}) -> {out}"
        return tool_result(evidence, text)


lod_tool = LodTool()
