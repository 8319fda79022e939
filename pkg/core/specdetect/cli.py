"""specdetect CLI

Command-line interface over the specdetect tools:

  - `specdetect synth --config exp.json --out run/y.csv`
  - `specdetect detect --input run/y.csv --out run/result.json`
  - `specdetect pca --input run/y.csv --k 5 --out run/pca`
  - `specdetect lod --config exp.json --out run/lod.json`
  - `specdetect plot-data --truth run/y.csv --result run/result.json --out run/plot.csv`
  - `specdetect detectors list`

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure
(results are still written).
"""

from __future__ import annotations

import argparse
import asyncio
import json
import logging
import sys
from typing import Any, NoReturn

from specdetect.config import DEFAULT_DETECTOR, Config
from specdetect.detectors import loader
from specdetect.exceptions import ConfigError, NumericalError, SpecDetectError
from specdetect.tools.base import SpecTool
from specdetect.tools.detect import STAGES, detect_tool
from specdetect.tools.lod import lod_tool
from specdetect.tools.pca import pca_tool
from specdetect.tools.plot_data import plot_data_tool
from specdetect.tools.synth import synth_tool

logger = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> NoReturn:
        raise ConfigError(f"{self.prog}: {message}")


def _configure_logging(verbose: int) -> None:
    level = Config.LOG_LEVEL
    if verbose == 1:
        level = "INFO"
    elif verbose > 1:
        level = "DEBUG"
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _pipeline_overrides(args: argparse.Namespace) -> dict[str, Any]:
    return {
        "gamma": args.gamma,
        "sg_window": args.sg_window,
        "sg_order": args.sg_order,
        "k_max": args.k_max,
    }


def _run(tool: SpecTool, arguments: dict[str, Any]) -> dict[str, Any]:
    result = asyncio.run(tool.call(arguments))
    print(result["text"])
    return result


def cmd_synth(args: argparse.Namespace) -> int:
    _run(synth_tool, {"config": args.config, "seed": args.seed, "out": args.out})
    return 0


def cmd_detect(args: argparse.Namespace) -> int:
    overrides = _pipeline_overrides(args)
    overrides["seed"] = args.seed
    result = _run(detect_tool, {
        "input": args.input,
        "out": args.out,
        "config": args.config,
        "overrides": overrides,
        "solvent": args.solvent,
        "from_stage": args.from_stage,
        "dump_intermediate": True if args.dump_intermediate == "" else args.dump_intermediate,
    })
    non_converged = result["evidence"]["non_converged"]
    if non_converged:
        logger.warning("%d peak fits did not converge; results were written", non_converged)
        return NumericalError.exit_code
    return 0


def cmd_pca(args: argparse.Namespace) -> int:
    _run(pca_tool, {
        "input": args.input,
        "k": args.k,
        "center": args.center,
        "truth": args.truth,
        "out": args.out,
        "config": args.config,
    })
    return 0


def cmd_lod(args: argparse.Namespace) -> int:
    _run(lod_tool, {
        "config": args.config,
        "pipeline": args.pipeline,
        "overrides": _pipeline_overrides(args),
        "detector": args.detector,
        "c_direction": args.direction,
        "eta_min": args.eta_min,
        "eta_max": args.eta_max,
        "eta_steps": args.eta_steps,
        "threshold": args.threshold,
        "trials": args.trials,
        "seed": args.seed,
        "out": args.out,
        "plot_out": args.plot_out,
    })
    return 0


def cmd_plot_data(args: argparse.Namespace) -> int:
    _run(plot_data_tool, {
        "truth": args.truth,
        "result": args.result,
        "out": args.out,
        "percentiles": args.percentiles,
    })
    return 0


def cmd_detectors_list(args: argparse.Namespace) -> int:
    items = loader.list_detector_entry_points()
    if args.json:
        print(json.dumps(items, indent=2, sort_keys=True))
        return 0
    w_group = max(len(i["group"]) for i in items)
    w_name = max(len(i["name"]) for i in items)
    for i in items:
        print(f"{i['group']:<{w_group}}  {i['name']:<{w_name}}  {i['value']}")
    return 0


def _add_pipeline_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--gamma", type=float, help="Sensitivity: minimum peak intensity")
    p.add_argument("--sg-window", type=int, help="Savitzky-Golay window (odd)")
    p.add_argument("--sg-order", type=int, help="Savitzky-Golay polynomial order")
    p.add_argument("--k-max", type=int, help="Largest analyte count considered")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=0, help="More logging (repeatable)")

    p = _Parser(prog="specdetect")
    sub = p.add_subparsers(dest="cmd", required=True)

    synth = sub.add_parser("synth", parents=[common], help="Synthesize a matrix with ground truth")
    synth.add_argument("--config", required=True, help="Experiment JSON")
    synth.add_argument("--seed", type=int, help="Overrides the experiment seed")
    synth.add_argument("--out", required=True, help="Matrix CSV path")
    synth.set_defaults(func=cmd_synth)

    detect = sub.add_parser("detect", parents=[common], help="Run the label-free detector")
    detect.add_argument("--input", required=True, help="Matrix CSV")
    detect.add_argument("--out", required=True, help="DetectionResult JSON path")
    detect.add_argument("--config", help="Pipeline settings JSON")
    detect.add_argument("--solvent", help="JSON holding the solvent spectrum (default: the sidecar)")
    detect.add_argument("--seed", type=int, help="k-means seed")
    detect.add_argument("--from-stage", choices=STAGES, default="raw",
                        help="'preprocessed' re-enters with a dumped post-preprocessing matrix")
    detect.add_argument("--dump-intermediate", nargs="?", const="", default=None, metavar="DIR",
                        help=f"Write intermediate products (default dir: {Config.DUMP_DIR})")
    _add_pipeline_flags(detect)
    detect.set_defaults(func=cmd_detect)

    pca = sub.add_parser("pca", parents=[common], help="PCA baseline with the oracle rotation")
    pca.add_argument("--input", required=True, help="Matrix CSV")
    pca.add_argument("--k", type=int, required=True, help="Number of components")
    pca.add_argument("--center", action="store_true", help="Subtract the column means first")
    pca.add_argument("--truth", help="Ground-truth sidecar (default: the one next to the input)")
    pca.add_argument("--config", help="Pipeline settings JSON for the component fits")
    pca.add_argument("--out", required=True, help="Output directory")
    pca.set_defaults(func=cmd_pca)

    lod = sub.add_parser("lod", parents=[common], help="Limit-of-detection sweep")
    lod.add_argument("--config", required=True, help="Experiment JSON")
    lod.add_argument("--pipeline", help="Pipeline settings JSON")
    lod.add_argument("--detector", default=DEFAULT_DETECTOR, help="Detector name (see 'detectors list')")
    lod.add_argument("--direction", type=float, nargs="+",
                     help="Relative concentrations (normalised; default: the experiment's quantities)")
    lod.add_argument("--eta-min", type=float)
    lod.add_argument("--eta-max", type=float)
    lod.add_argument("--eta-steps", type=int)
    lod.add_argument("--threshold", type=float, default=0.9)
    lod.add_argument("--trials", type=int, default=10)
    lod.add_argument("--seed", type=int)
    lod.add_argument("--out", required=True, help="LodCurve JSON path")
    lod.add_argument("--plot-out", help="Plot CSV at the LOD (default: <out>.plot.csv)")
    _add_pipeline_flags(lod)
    lod.set_defaults(func=cmd_lod)

    plot = sub.add_parser("plot-data", parents=[common], help="Truth-versus-estimate plot table")
    plot.add_argument("--truth", required=True, help="Sidecar JSON or the matrix CSV next to it")
    plot.add_argument("--result", required=True, help="DetectionResult JSON")
    plot.add_argument("--out", required=True, help="Plot CSV path")
    plot.add_argument("--percentiles", type=float, nargs=2, metavar=("SOLID", "DOTTED"),
                      help="Prominence percentiles for solid/dotted peaks (default 50 30)")
    plot.set_defaults(func=cmd_plot_data)

    detectors = sub.add_parser("detectors", help="Detector commands")
    detectors_sub = detectors.add_subparsers(dest="detectors_cmd", required=True)
    detectors_list = detectors_sub.add_parser("list", parents=[common], help="List available detectors")
    detectors_list.add_argument("--json", action="store_true", help="Output JSON")
    detectors_list.set_defaults(func=cmd_detectors_list)
    return p


def main(argv: list[str] | None = None) -> int:
    argv = argv if argv is not None else sys.argv[1:]
    try:
        ns = build_parser().parse_args(argv)
        _configure_logging(ns.verbose)
        return ns.func(ns)
    except SpecDetectError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    raise SystemExit(main())
