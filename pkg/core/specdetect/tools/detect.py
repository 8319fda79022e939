"""Run the label-free detector on a matrix CSV."""
from __future__ import annotations

import asyncio
import logging
from dataclasses import asdict
from pathlib import Path
from typing import Any

import numpy as np

from specdetect.config import Config
from specdetect.exceptions import ConfigError
from specdetect.io import (
    Sidecar,
    load_measurement,
    read_json,
    sidecar_path,
    write_candidates_csv,
    write_detection,
    write_fits_csv,
    write_json,
    write_matrix,
    write_sidecar,
)
from specdetect.model.types import MeasurementMatrix
from specdetect.pipeline import PipelineRun, run_from_preprocessed, run_label_free
from specdetect.schemas import load_pipeline_config
from specdetect.tools.base import ToolResult, overrides, require, tool_result

logger = logging.getLogger(__name__)

STAGES = ("raw", "preprocessed")


def _solvent_spectrum(arguments: dict[str, Any], side: Sidecar | None) -> np.ndarray | None:
    """Solvent spectrum from ``--solvent`` or the sidecar.

    Returns None when the sidecar states that no solvent is present.

    Raises:
        ConfigError: If neither source provides one.
    """
    path = arguments.get("solvent")
    if path:
        doc = read_json(path)
        spectrum = doc["solvent"]["spectrum"] if isinstance(doc.get("solvent"), dict) else doc.get("spectrum")
        if spectrum is None:
            raise ConfigError(f"{path} has no solvent spectrum")
        return np.asarray(spectrum, dtype=float)
    if side is None or side.solvent is None:
        raise ConfigError("no solvent spectrum: pass --solvent or keep the sidecar next to the matrix")
    if not np.any(side.solvent.spectrum > 0):
        logger.info("sidecar declares no solvent; skipping solvent subtraction")
        return None
    return side.solvent.spectrum


def _dump(run: PipelineRun, directory: Path) -> list[str]:
    directory.mkdir(parents=True, exist_ok=True)
    processed = MeasurementMatrix(grid_t=run.processed.grid_t, grid_f=run.processed.grid_f,
                                  values=run.processed.values)
    files = [write_matrix(directory / "preprocessed.csv", processed)]
    files.append(write_sidecar(sidecar_path(files[0]), processed))
    files.append(write_candidates_csv(directory / "candidates.csv", list(run.candidates)))
    files.append(write_fits_csv(directory / "fits.csv", list(run.fits)))
    files.append(write_json(directory / "fits.json", [f.to_dict() for f in run.fits]))
    pre = run.preprocessing
    if pre is not None:
        files.append(write_json(directory / "preprocess.json", {
            "solvent_coeffs": pre.solvent_coeffs.tolist(),
            "baseline": None if pre.baseline is None else asdict(pre.baseline),
            "despiked_cells": pre.despiked_cells,
        }))
    if run.clusters is not None:
        files.append(write_json(directory / "clusters.json", {
            "k_hat": run.clusters.k_hat,
            "centroids": run.clusters.centroids.tolist(),
            "assignments": run.clusters.assignments.tolist(),
            "inertia": run.clusters.inertia,
            "restart": run.clusters.restart,
        }))
    return [str(f) for f in files]


class DetectTool:
    """preprocess -> peakfind -> peakfit -> cluster, written as DetectionResult JSON."""

    @staticmethod
    def get_definition() -> dict[str, Any]:
        return {
            "name": "detect",
            "description": "Estimate analyte spectra and elution patterns from a measurement matrix.",
            "inputSchema": {
                "type": "object",
                "properties": {
                    "input": {"type": "string", "description": "Matrix CSV path."},
                    "out": {"type": "string", "description": "DetectionResult JSON path."},
                    "config": {"type": "string", "description": "Pipeline settings JSON."},
                    "overrides": {"type": "object", "description": "Pipeline settings that win over the file."},
                    "solvent": {"type": "string", "description": "JSON with the solvent spectrum."},
                    "from_stage": {"type": "string", "enum": list(STAGES)},
                    "dump_intermediate": {"type": ["string", "boolean"]},
                },
                "required": ["input", "out"],
            },
        }

    async def call(self, arguments: dict[str, Any]) -> ToolResult:
        return await asyncio.to_thread(self._run, arguments)

    @staticmethod
    def _run(arguments: dict[str, Any]) -> ToolResult:
        config = load_pipeline_config(arguments.get("config")).with_overrides(**overrides(arguments))
        stage = arguments.get("from_stage") or "raw"
        if stage not in STAGES:
            raise ConfigError(f"unknown stage {stage!r}; expected one of {', '.join(STAGES)}")

        y, side = load_measurement(require(arguments, "input"))
        if stage == "preprocessed":
            run = run_from_preprocessed(y, config)
        else:
            run = run_label_free(y, _solvent_spectrum(arguments, side), config)

        out = write_detection(require(arguments, "out"), run.result)
        dumps: list[str] = []
        dump = arguments.get("dump_intermediate")
        if dump:
            dumps = _dump(run, Path(Config.DUMP_DIR if dump is True else dump))

        evidence = {
            "k_hat": run.result.k_hat,
            "candidates": len(run.candidates),
            "fits": len(run.fits),
            "non_converged": run.non_converged,
            "out": str(out),
            "dumps": dumps,
            "stage": stage,
        }
        text = f"k_hat={run.result.k_hat} from {len(run.fits)} peak fits ({len(run.candidates)} candidates) -> {out}"
        if run.non_converged:
            text += f"; {run.non_converged} fits did not converge"
        return tool_result(evidence, text)


detect_tool = DetectTool()
