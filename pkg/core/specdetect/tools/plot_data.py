"""Overlay table of true and detected peaks/windows for external plotting."""
from __future__ import annotations

import asyncio
from typing import Any

from specdetect.exceptions import DataError
from specdetect.io import read_detection, read_sidecar, sidecar_path, write_table
from specdetect.metrics import DEFAULT_PERCENTILES, PLOT_COLUMNS, emit_detection_plot_data
from specdetect.tools.base import ToolResult, require, tool_result


class PlotDataTool:

    @staticmethod
    def get_definition() -> dict[str, Any]:
        return {
            "name": "plot_data",
            "description": "Emit the truth-versus-estimate plot table (CSV).",
            "inputSchema": {
                "type": "object",
                "properties": {
                    "truth": {"type": "string", "description": "Sidecar JSON, or the matrix CSV next to it."},
                    "result": {"type": "string", "description": "DetectionResult JSON."},
                    "out": {"type": "string"},
                    "percentiles": {"type": "array", "items": {"type": "number"}},
                },
                "required": ["truth", "result", "out"],
            },
        }

    async def call(self, arguments: dict[str, Any]) -> ToolResult:
        return await asyncio.to_thread(self._run, arguments)

    @staticmethod
    def _run(arguments: dict[str, Any]) -> ToolResult:
        truth_path = str(require(arguments, "truth"))
        if truth_path.endswith(".csv"):
            truth_path = str(sidecar_path(truth_path))
        side = read_sidecar(truth_path)
        if side.truth is None:
            raise DataError(f"{truth_path} carries no ground truth")
        result = read_detection(require(arguments, "result"))
        rows = emit_detection_plot_data(
            side.truth.analytes, result, side.grid_f, side.grid_t,
            arguments.get("percentiles") or DEFAULT_PERCENTILES,
        )
        out = write_table(require(arguments, "out"), rows, PLOT_COLUMNS)
        evidence = {"out": str(out), "rows": len(rows), "bands": sum(r["kind"] == "band" for r in rows)}
        return tool_result(evidence, f"wrote {len(rows)} plot rows -> {out}")


plot_data_tool = PlotDataTool()
