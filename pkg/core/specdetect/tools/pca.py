"""PCA baseline with the oracle rotation."""
from __future__ import annotations

import asyncio
import logging
from pathlib import Path
from typing import Any

import numpy as np

from specdetect.io import load_measurement, read_sidecar, write_detection, write_factor_csv, write_json
from specdetect.model.forward import elution_matrix, spectrum_matrix
from specdetect.pca import (
    oracle_rotation,
    pca_decompose,
    pca_detection_result,
    reconstruct_components,
    rotation_report,
)
from specdetect.schemas import load_pipeline_config
from specdetect.tools.base import ToolResult, overrides, require, tool_result

logger = logging.getLogger(__name__)


class PcaTool:
    """Writes U, V and, with ground truth, the oracle rotation and rotated factors."""

    @staticmethod
    def get_definition() -> dict[str, Any]:
        return {
            "name": "pca",
            "description": "Truncated PCA of a matrix plus the ground-truth oracle rotation.",
            "inputSchema": {
                "type": "object",
                "properties": {
                    "input": {"type": "string"},
                    "k": {"type": "integer", "minimum": 1},
                    "center": {"type": "boolean"},
                    "truth": {"type": "string", "description": "Sidecar JSON with the ground truth."},
                    "out": {"type": "string", "description": "Output directory."},
                    "config": {"type": "string", "description": "Pipeline settings for the component fits."},
                    "overrides": {"type": "object"},
                },
                "required": ["input", "k", "out"],
            },
        }

    async def call(self, arguments: dict[str, Any]) -> ToolResult:
        return await asyncio.to_thread(self._run, arguments)

    @staticmethod
    def _run(arguments: dict[str, Any]) -> ToolResult:
        y, side = load_measurement(require(arguments, "input"))
        out = Path(require(arguments, "out"))
        model = pca_decompose(y, int(require(arguments, "k")), center=bool(arguments.get("center", False)))

        norm = float(np.linalg.norm(y.values))
        error = float(np.linalg.norm(y.values - model.reconstruction()))
        files = [
            write_factor_csv(out / "u.csv", model.u, y.grid_t.axis, "time"),
            write_factor_csv(out / "v.csv", model.v, y.grid_f.axis, "frequency"),
        ]
        report: dict[str, Any] = {
            "k": model.k,
            "singular_values": model.singular_values.tolist(),
            "reconstruction_error": error,
            "relative_error": error / norm if norm > 0 else 0.0,
        }

        truth = read_sidecar(arguments["truth"]).truth if arguments.get("truth") else (side.truth if side else None)
        if truth is None or not truth.analytes:
            report["rotation"] = "skipped: no ground truth supplied"
        else:
            lam = elution_matrix(truth.analytes, y.grid_t)
            xs = spectrum_matrix(truth.analytes, y.grid_f)
            rotation = oracle_rotation(model, lam, xs)
            lambda_hat, x_hat = reconstruct_components(model, rotation.t, allow_pinv=rotation.singular)
            files += [
                write_json(out / "rotation.json", {
                    "t": rotation.t.tolist(),
                    "assigned": rotation.assigned,
                    "unassigned": rotation.unassigned,
                    "singular": rotation.singular,
                }),
                write_factor_csv(out / "lambda_hat.csv", lambda_hat, y.grid_t.axis, "time"),
                write_factor_csv(out / "x_hat.csv", x_hat, y.grid_f.axis, "frequency"),
            ]
            config = load_pipeline_config(arguments.get("config")).with_overrides(**overrides(arguments))
            result = pca_detection_result(model, rotation, y.grid_t, y.grid_f, config)
            files.append(write_detection(out / "detection.json", result))
            report["rotation"] = rotation_report(lambda_hat, x_hat, lam, xs)
            report["analytes"] = [a.name for a in truth.analytes]

        files.append(write_json(out / "report.json", report))
        evidence = {**report, "files": [str(f) for f in files]}
        text = f"PCA k={model.k}: relative reconstruction error {report['relative_error']:.3g}"
        if isinstance(report["rotation"], str):
            text += f" ({report['rotation']})"
        else:
            corr = min(r["elution_corr"] for r in report["rotation"])
            text += f"; worst rotated elution correlation {corr:.4f}"
        return tool_result(evidence, text)


pca_tool = PcaTool()
