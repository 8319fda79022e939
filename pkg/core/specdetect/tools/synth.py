"""Synthesize a measurement matrix from an experiment document."""
from __future__ import annotations

import asyncio
import logging
from typing import Any

from specdetect.io import sidecar_path, write_matrix, write_sidecar
from specdetect.model.forward import check_elution_overlap
from specdetect.schemas import load_experiment
from specdetect.tools.base import ToolResult, require, tool_result

logger = logging.getLogger(__name__)


class SynthTool:
    """Writes a synthetic matrix CSV and its ground-truth sidecar."""

    @staticmethod
    def get_definition() -> dict[str, Any]:
        return {
            "name": "synth",
            "description": "Synthesize a time-resolved spectral matrix with known ground truth.",
            "inputSchema": {
                "type": "object",
                "properties": {
                    "config": {"type": "string", "description": "Experiment JSON path."},
                    "seed": {"type": "integer", "description": "Overrides the document seed."},
                    "out": {"type": "string", "description": "Matrix CSV path."},
                },
                "required": ["config", "out"],
            },
        }

    async def call(self, arguments: dict[str, Any]) -> ToolResult:
        return await asyncio.to_thread(self._run, arguments)

    @staticmethod
    def _run(arguments: dict[str, Any]) -> ToolResult:
        experiment = load_experiment(require(arguments, "config"))
        out = require(arguments, "out")
        y = experiment.synthesize(arguments.get("seed"))
        truth = y.truth
        assert truth is not None
        matrix_path = write_matrix(out, y)
        side = write_sidecar(sidecar_path(matrix_path), y)

        names = [a.name for a in truth.analytes]
        evidence = {
            "matrix": str(matrix_path),
            "sidecar": str(side),
            "shape": list(y.shape),
            "analytes": names,
            "overlaps": [list(p) for p in check_elution_overlap(truth.analytes)],
            "seed": truth.seed,
            "config_hash": truth.config_hash,
        }
        text = f"synthesized {y.shape[0]}x{y.shape[1]} matrix with {len(names)} analytes -> {matrix_path}"
        return tool_result(evidence, text)


synth_tool = SynthTool()
