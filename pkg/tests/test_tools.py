import asyncio
import json

import pandas as pd
import pytest

from specdetect.exceptions import ConfigError
from specdetect.metrics import PLOT_COLUMNS
from specdetect.tools.detect import detect_tool
from specdetect.tools.lod import eta_grid, lod_tool
from specdetect.tools.pca import pca_tool
from specdetect.tools.plot_data import plot_data_tool
from specdetect.tools.synth import synth_tool


def _synth(config_path, out):
    return asyncio.run(synth_tool.call({"config": str(config_path), "out": str(out)}))


def test_tool_definitions_name_their_required_arguments():
    for tool in (synth_tool, detect_tool, pca_tool, lod_tool, plot_data_tool):
        definition = tool.get_definition()
        assert set(definition) == {"name", "description", "inputSchema"}
        schema = definition["inputSchema"]
        assert set(schema["required"]) <= set(schema["properties"])


def test_synth_tool_reports_its_outputs(small_experiment_path, tmp_path):
    result = _synth(small_experiment_path, tmp_path / "y.csv")
    evidence = result["evidence"]
    assert evidence["shape"] == [60, 200]
    assert evidence["analytes"] == ["a", "b"]
    assert evidence["overlaps"] == []
    assert evidence["seed"] == 3
    assert "60x200" in result["text"]


def test_missing_argument_is_a_config_error(small_experiment_path):
    with pytest.raises(ConfigError, match="'out'"):
        asyncio.run(synth_tool.call({"config": str(small_experiment_path)}))


def test_detect_tool_dump_and_reentry(small_experiment_path, tmp_path):
    matrix = tmp_path / "y.csv"
    _synth(small_experiment_path, matrix)
    dump_dir = tmp_path / "dump"
    full = asyncio.run(detect_tool.call({
        "input": str(matrix), "out": str(tmp_path / "full.json"), "dump_intermediate": str(dump_dir),
    }))
    assert str(dump_dir / "preprocessed.csv") in full["evidence"]["dumps"]
    assert (dump_dir / "fits.csv").exists()
    assert (dump_dir / "preprocess.json").exists()

    resumed = asyncio.run(detect_tool.call({
        "input": str(dump_dir / "preprocessed.csv"), "out": str(tmp_path / "resumed.json"),
        "from_stage": "preprocessed",
    }))
    assert resumed["evidence"]["stage"] == "preprocessed"
    assert resumed["evidence"]["k_hat"] == full["evidence"]["k_hat"]
    assert resumed["evidence"]["fits"] == full["evidence"]["fits"]
    assert (tmp_path / "resumed.json").read_bytes() == (tmp_path / "full.json").read_bytes()
    with pytest.raises(ConfigError):
        asyncio.run(detect_tool.call({"input": str(matrix), "out": str(tmp_path / "x.json"), "from_stage": "fitted"}))


def test_detect_tool_reads_an_explicit_solvent(small_experiment_path, tmp_path):
    matrix = tmp_path / "y.csv"
    _synth(small_experiment_path, matrix)
    (tmp_path / "y.truth.json").unlink()
    with pytest.raises(ConfigError):
        asyncio.run(detect_tool.call({"input": str(matrix), "out": str(tmp_path / "r.json")}))

    solvent = tmp_path / "solvent.json"
    solvent.write_text(json.dumps({"spectrum": [0.0] * 199 + [1.0]}), encoding="utf-8")
    result = asyncio.run(detect_tool.call({"input": str(matrix), "out": str(tmp_path / "r.json"),
                                           "solvent": str(solvent)}))
    assert result["evidence"]["stage"] == "raw"


def test_pca_tool_with_and_without_truth(small_experiment_path, tmp_path):
    matrix = tmp_path / "y.csv"
    _synth(small_experiment_path, matrix)
    result = asyncio.run(pca_tool.call({"input": str(matrix), "k": 3, "out": str(tmp_path / "pca")}))
    evidence = result["evidence"]
    assert evidence["k"] == 3
    assert evidence["analytes"] == ["a", "b"]
    assert [r["component"] for r in evidence["rotation"]] == [0, 1]
    assert all(r["elution_corr"] > 0.95 for r in evidence["rotation"])
    rotation = json.loads((tmp_path / "pca" / "rotation.json").read_text(encoding="utf-8"))
    assert (rotation["assigned"], rotation["unassigned"]) == (2, 1)
    assert (tmp_path / "pca" / "detection.json").exists()

    (tmp_path / "y.truth.json").unlink()
    bare = asyncio.run(pca_tool.call({"input": str(matrix), "k": 2, "out": str(tmp_path / "bare")}))
    assert bare["evidence"]["rotation"] == "skipped: no ground truth supplied"
    assert not (tmp_path / "bare" / "rotation.json").exists()


def test_eta_grid_defaults_and_validation():
    grid = eta_grid([30.0, 40.0], None, None, None)
    assert grid.size == 8
    assert grid[-1] == pytest.approx(50.0)
    assert grid[0] == pytest.approx(2.5)
    assert list(eta_grid([3.0, 4.0], None, None, 1)) == [5.0]
    for bad in ((1.0, 0.5, 3), (-1.0, 2.0, 3), (1.0, 2.0, 0)):
        with pytest.raises(ConfigError):
            eta_grid([1.0], *bad)


def test_lod_tool_writes_curve_and_plot(small_experiment_path, tmp_path):
    out = tmp_path / "lod.json"
    result = asyncio.run(lod_tool.call({
        "config": str(small_experiment_path), "detector": "pca_oracle", "eta_min": 20.0, "eta_max": 128.0,
        "eta_steps": 2, "trials": 2, "threshold": 1.01, "out": str(out),
    }))
    evidence = result["evidence"]
    assert evidence["eta_star"] == "not-found"
    assert evidence["plot_eta"] == pytest.approx(128.0)
    assert len(evidence["rhos"]) == 2
    doc = json.loads(out.read_text(encoding="utf-8"))
    assert doc["eta_star"] == "not-found"
    assert doc["detector"] == "pca_oracle"
    plot = pd.read_csv(tmp_path / "lod.plot.csv")
    assert list(plot.columns) == PLOT_COLUMNS
    assert (plot["kind"] == "band").sum() == 2

    with pytest.raises(ConfigError):
        asyncio.run(lod_tool.call({"config": str(small_experiment_path), "detector": "nope", "out": str(out)}))


def test_plot_data_tool(small_experiment_path, tmp_path):
    matrix = tmp_path / "y.csv"
    _synth(small_experiment_path, matrix)
    asyncio.run(detect_tool.call({"input": str(matrix), "out": str(tmp_path / "r.json")}))
    result = asyncio.run(plot_data_tool.call({
        "truth": str(matrix), "result": str(tmp_path / "r.json"), "out": str(tmp_path / "plot.csv"),
    }))
    assert result["evidence"]["bands"] == 2
    plot = pd.read_csv(tmp_path / "plot.csv")
    assert set(plot["kind"]) <= {"band", "peak", "est_band", "est_peak"}
