"""File formats: matrix CSV, ground-truth sidecar JSON and result exports.

Matrix CSV layout: the header row is ``time`` followed by the frequency axis
(cm^-1); every following row is a time stamp (s) followed by the M
intensities of that spectrum. Floats are written in their shortest
round-trip form so repeated runs give identical bytes.

The sidecar (``<stem>.truth.json``) carries the grids, the solvent vectors and,
for synthesized data, the complete ground truth.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from specdetect.exceptions import DataError
from specdetect.model.forward import analyte_matrix
from specdetect.model.types import (
    AnalyteSpec,
    DetectedAnalyte,
    DetectionResult,
    ElutionWindow,
    FrequencyGrid,
    GroundTruth,
    MeasurementMatrix,
    NoiseConfig,
    PeakCandidate,
    PeakFit,
    PseudoVoigtPeak,
    SolventSpec,
    TimeGrid,
)

logger = logging.getLogger(__name__)

SIDECAR_SUFFIX = ".truth.json"
_SPACING_RTOL = 1e-6

FIT_COLUMNS = [
    "t_index", "f_index", "intensity", "prominence", "a_hat", "gamma_hat", "sigma2_hat", "c_hat",
    "nu_hat", "o_hat", "d_hat", "alpha_hat", "beta_hat", "mag_hat", "rss", "iterations", "converged",
]


def sidecar_path(matrix_path: str | Path) -> Path:
    """``run/y.csv`` -> ``run/y.truth.json``."""
    p = Path(matrix_path)
    return p.with_name(p.stem + SIDECAR_SUFFIX)


def write_json(path: str | Path, payload: Any) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return p


def read_json(path: str | Path) -> Any:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise DataError(f"file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path} is not valid JSON: {exc}") from exc


# ---------------------------------------------------------------- matrix CSV

def write_matrix(path: str | Path, y: MeasurementMatrix) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(
        y.values,
        index=pd.Index(y.grid_t.axis, name="time"),
        columns=[repr(float(f)) for f in y.grid_f.axis],
    )
    frame.to_csv(p, float_format=None, lineterminator="\n")
    return p


def _uniform_step(axis: np.ndarray, what: str, fallback: float) -> float:
    if axis.size < 2:
        return fallback
    steps = np.diff(axis)
    step = float(steps[0])
    if not step > 0:
        raise DataError(f"{what} axis must be strictly increasing")
    if not np.allclose(steps, step, rtol=_SPACING_RTOL, atol=0.0):
        raise DataError(f"{what} axis is not uniformly spaced")
    return step


def read_matrix(path: str | Path) -> MeasurementMatrix:
    """Parses a matrix CSV; the grids are inferred from its axes.

    Raises:
        DataError: On missing files, non-numeric cells or non-uniform axes.
    """
    try:
        frame = pd.read_csv(path, index_col=0, float_precision="round_trip")
    except FileNotFoundError as exc:
        raise DataError(f"matrix file not found: {path}") from exc
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot parse matrix CSV {path}: {exc}") from exc

    if frame.shape[0] == 0 or frame.shape[1] == 0:
        raise DataError(f"matrix CSV {path} has no data cells")
    try:
        freqs = pd.to_numeric(pd.Series(frame.columns), errors="raise").to_numpy(dtype=float)
        times = pd.to_numeric(pd.Series(frame.index), errors="raise").to_numpy(dtype=float)
    except (ValueError, TypeError) as exc:
        raise DataError(f"matrix CSV {path}: axis labels must be numeric ({exc})") from exc

    cells = frame.apply(pd.to_numeric, errors="coerce")
    bad = cells.isna().to_numpy()
    if bad.any():
        row, col = map(int, np.argwhere(bad)[0])
        raise DataError(
            f"matrix CSV {path}: non-numeric or missing value at row {row + 2}, column {col + 2} "
            f"({int(bad.sum())} bad cells)"
        )

    delta_f = _uniform_step(freqs, "frequency", 1.0)
    delta_t = _uniform_step(times, "time", times[0] if times.size == 1 and times[0] > 0 else 1.0)
    if times.size > 1 and not np.isclose(times[0], 0.0, atol=delta_t * 1e-6):
        logger.warning("time axis of %s starts at %g s; samples are re-indexed from 0", path, times[0])
    gt = TimeGrid(delta_t=delta_t, n=times.size)
    gf = FrequencyGrid(f_min=float(freqs[0]), delta_f=delta_f, m=freqs.size)
    return MeasurementMatrix(grid_t=gt, grid_f=gf, values=cells.to_numpy(dtype=float))


# ------------------------------------------------------------------ sidecar

@dataclass(frozen=True, eq=False)
class Sidecar:
    grid_t: TimeGrid
    grid_f: FrequencyGrid
    solvent: SolventSpec | None
    truth: GroundTruth | None


def _peak_dict(p: PseudoVoigtPeak) -> dict[str, float]:
    return asdict(p)


def analyte_to_dict(a: AnalyteSpec) -> dict[str, Any]:
    return {
        "name": a.name,
        "quantity": a.quantity,
        "window": asdict(a.window),
        "peaks": [_peak_dict(p) for p in a.peaks],
    }


def analyte_from_dict(d: dict[str, Any]) -> AnalyteSpec:
    return AnalyteSpec(
        name=str(d["name"]),
        quantity=float(d["quantity"]),
        window=ElutionWindow(**d["window"]),
        peaks=tuple(PseudoVoigtPeak(**p) for p in d["peaks"]),
    )


def write_sidecar(path: str | Path, y: MeasurementMatrix, solvent: SolventSpec | None = None) -> Path:
    """Writes grids, solvent and (if attached) the ground truth of ``y``."""
    truth = y.truth
    solvent = solvent if solvent is not None else (truth.solvent if truth is not None else None)
    doc: dict[str, Any] = {
        "grid_t": asdict(y.grid_t),
        "grid_f": asdict(y.grid_f),
        "solvent": None
        if solvent is None
        else {"spectrum": solvent.spectrum.tolist(), "elution": solvent.elution.tolist()},
        "truth": None,
    }
    if truth is not None:
        noise = asdict(truth.noise)
        if noise["fluorescence_coeffs"] is not None:
            noise["fluorescence_coeffs"] = [list(row) for row in noise["fluorescence_coeffs"]]
        doc["truth"] = {
            "seed": truth.seed,
            "config_hash": truth.config_hash,
            "noise": noise,
            "analytes": [analyte_to_dict(a) for a in truth.analytes],
        }
    return write_json(path, doc)


def read_sidecar(path: str | Path) -> Sidecar:
    doc = read_json(path)
    try:
        gt = TimeGrid(**doc["grid_t"])
        gf = FrequencyGrid(**doc["grid_f"])
        solvent = None
        if doc.get("solvent") is not None:
            solvent = SolventSpec(spectrum=np.asarray(doc["solvent"]["spectrum"]),
                                  elution=np.asarray(doc["solvent"]["elution"]))
        truth = None
        if doc.get("truth") is not None:
            t = doc["truth"]
            analytes = tuple(analyte_from_dict(a) for a in t["analytes"])
            truth = GroundTruth(
                analytes=analytes,
                solvent=solvent if solvent is not None else SolventSpec.absent(gt, gf),
                noise=NoiseConfig(**t["noise"]),
                seed=int(t["seed"]),
                analyte_matrix=analyte_matrix(analytes, gt, gf),
                config_hash=str(t.get("config_hash", "")),
            )
    except (KeyError, TypeError) as exc:
        raise DataError(f"malformed sidecar {path}: {exc!r}") from exc
    return Sidecar(grid_t=gt, grid_f=gf, solvent=solvent, truth=truth)


def load_measurement(path: str | Path) -> tuple[MeasurementMatrix, Sidecar | None]:
    """Reads a matrix CSV and, when present next to it, its sidecar.

    The sidecar grids take precedence over the inferred ones; its truth is
    attached to the returned matrix.
    """
    y = read_matrix(path)
    side_path = sidecar_path(path)
    if not side_path.exists():
        return y, None
    side = read_sidecar(side_path)
    if (side.grid_t.n, side.grid_f.m) != y.shape:
        raise DataError(f"sidecar {side_path} grids do not match the matrix shape {y.shape}")
    return MeasurementMatrix(grid_t=side.grid_t, grid_f=side.grid_f, values=y.values, truth=side.truth), side


# --------------------------------------------------------- detection results

def fit_from_dict(d: dict[str, Any]) -> PeakFit:
    cand = PeakCandidate(
        t_index=int(d["t_index"]),
        f_index=int(d["f_index"]),
        intensity=float(d["intensity"]),
        prominence=float(d["prominence"]),
    )
    return PeakFit(
        candidate=cand,
        a_hat=float(d["a_hat"]),
        gamma_hat=float(d["gamma_hat"]),
        c_hat=float(d["c_hat"]),
        nu_hat=float(d["nu_hat"]),
        o_hat=float(d["o_hat"]),
        d_hat=float(d["d_hat"]),
        alpha_hat=float(d["alpha_hat"]),
        beta_hat=float(d["beta_hat"]),
        mag_hat=float(d["mag_hat"]),
        rss=float(d["rss"]),
        converged=bool(d["converged"]),
        sigma2_hat=float(d.get("sigma2_hat", 0.0)),
        iterations=int(d.get("iterations", 0)),
    )


def detection_to_dict(result: DetectionResult) -> dict[str, Any]:
    return {
        "k_hat": result.k_hat,
        "analytes": [
            {
                "spectrum": a.spectrum_hat.tolist(),
                "elution": a.elution_hat.tolist(),
                "peaks": [fit.to_dict() for fit in a.member_peaks],
                "centroid": list(a.centroid),
                "rise": a.rise,
                "fall": a.fall,
                "magnitude": a.magnitude,
            }
            for a in result.analytes
        ],
    }


def detection_from_dict(doc: dict[str, Any]) -> DetectionResult:
    try:
        analytes = tuple(
            DetectedAnalyte(
                spectrum_hat=np.asarray(a["spectrum"], dtype=float),
                elution_hat=np.asarray(a["elution"], dtype=float),
                member_peaks=tuple(fit_from_dict(p) for p in a["peaks"]),
                centroid=tuple(a.get("centroid", (0.0, 0.0))),  # type: ignore[arg-type]
                rise=float(a.get("rise", 0.0)),
                fall=float(a.get("fall", 0.0)),
                magnitude=float(a.get("magnitude", 0.0)),
            )
            for a in doc["analytes"]
        )
        return DetectionResult(k_hat=int(doc["k_hat"]), analytes=analytes)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed detection result: {exc!r}") from exc


def write_detection(path: str | Path, result: DetectionResult) -> Path:
    return write_json(path, detection_to_dict(result))


def read_detection(path: str | Path) -> DetectionResult:
    return detection_from_dict(read_json(path))


# ------------------------------------------------------------ tabular exports

def write_table(path: str | Path, rows: list[dict[str, Any]], columns: list[str]) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(rows, columns=columns).to_csv(p, index=False, lineterminator="\n")
    return p


def write_fits_csv(path: str | Path, fits: list[PeakFit]) -> Path:
    return write_table(path, [fit.to_dict() for fit in fits], FIT_COLUMNS)


def write_candidates_csv(path: str | Path, candidates: list[PeakCandidate]) -> Path:
    rows = [
        {"t": c.t_index, "f": c.f_index, "intensity": c.intensity, "prominence": c.prominence}
        for c in candidates
    ]
    return write_table(path, rows, ["t", "f", "intensity", "prominence"])


def write_factor_csv(path: str | Path, factor: np.ndarray, axis: np.ndarray, axis_name: str) -> Path:
    """One row per axis point, one column per component."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(
        factor,
        index=pd.Index(axis, name=axis_name),
        columns=[f"c{k}" for k in range(factor.shape[1])],
    )
    frame.to_csv(p, lineterminator="\n")
    return p
