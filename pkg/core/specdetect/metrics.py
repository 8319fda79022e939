"""Detection quality, limit-of-detection sweeps and plot tables.

rho compares a reconstruction Y-hat with a reference Y row by row (time
samples) through cosine similarity. The limit of detection for a relative
concentration direction c is the smallest scaling eta at which the mean rho
over repeated noisy syntheses reaches a threshold.
"""

from __future__ import annotations

import logging
import warnings
from collections.abc import Callable, Sequence
from typing import Any, Literal

import numpy as np
from numpy.typing import ArrayLike
from scipy import signal

from specdetect.exceptions import DataError, DimensionError
from specdetect.model.forward import analyte_spectrum, synthesize
from specdetect.model.lineshapes import eval_pseudo_voigt
from specdetect.model.types import (
    AnalyteSpec,
    DetectionResult,
    FrequencyGrid,
    LodCurve,
    MeasurementMatrix,
    PeakCandidate,
    SolventSpec,
    TimeGrid,
)
from specdetect.peakfind import prominence_percentiles
from specdetect.runtime import derive_seed, parallel_map
from specdetect.schemas import ExperimentConfig, PipelineConfig

logger = logging.getLogger(__name__)

Normalization = Literal["paper", "extent", "mean"]
Detector = Callable[[MeasurementMatrix, SolventSpec, PipelineConfig], DetectionResult]

PLOT_COLUMNS = ["kind", "analyte", "x0", "x1", "y", "style", "height"]
DEFAULT_PERCENTILES = (50.0, 30.0)


def reconstruct_y(result: DetectionResult, gt: TimeGrid, gf: FrequencyGrid) -> MeasurementMatrix:
    """Y-hat = sum_k outer(lambda-hat_k, X-hat_k); the solvent is not part of it.

    Raises:
        DimensionError: If an analyte's vectors do not match the grids.
    """
    values = np.zeros((gt.n, gf.m))
    for k, analyte in enumerate(result.analytes):
        if analyte.elution_hat.shape != (gt.n,) or analyte.spectrum_hat.shape != (gf.m,):
            raise DimensionError(
                f"analyte {k}: vectors {analyte.elution_hat.shape}/{analyte.spectrum_hat.shape} "
                f"do not match grids ({gt.n},)/({gf.m},)"
            )
        values += np.outer(analyte.elution_hat, analyte.spectrum_hat)
    return MeasurementMatrix(grid_t=gt, grid_f=gf, values=values)


def rho(y: MeasurementMatrix, y_hat: MeasurementMatrix, normalization: Normalization = "mean") -> float:
    """Row-wise cosine similarity between Y and Y-hat.

    Rows where Y has zero norm are skipped. A zero Y-hat row against a nonzero
    Y row counts with similarity 0. ``mean`` divides by the number of counted
    rows; ``paper`` divides by (N * delta_t) * (M * delta_f), and ``extent`` is
    another name for it.

    Raises:
        DimensionError: If the shapes differ.
        DataError: If every row of Y has zero norm.
    """
    a, b = y.values, y_hat.values
    if a.shape != b.shape:
        raise DimensionError(f"cannot compare {a.shape} with {b.shape}")
    norm_a = np.linalg.norm(a, axis=1)
    norm_b = np.linalg.norm(b, axis=1)
    counted = norm_a > 0
    if not np.any(counted):
        raise DataError("all rows of the reference matrix have zero norm")
    dots = np.einsum("ij,ij->i", a[counted], b[counted])
    denom = norm_a[counted] * norm_b[counted]
    cosines = np.divide(dots, denom, out=np.zeros_like(dots), where=denom > 0)
    total = float(np.sum(cosines))
    if normalization == "mean":
        return total / int(counted.sum())
    if normalization in ("paper", "extent"):
        return total / (y.grid_t.duration * (y.grid_f.m * y.grid_f.delta_f))
    raise DataError(f"unknown normalization {normalization!r}")


def _check_direction(c: np.ndarray, n_analytes: int) -> None:
    if c.shape != (n_analytes,):
        raise DataError(f"concentration direction has {c.size} entries for {n_analytes} analytes")
    if abs(float(np.linalg.norm(c)) - 1.0) > 1e-9:
        raise DataError(f"concentration direction must have unit norm, got {np.linalg.norm(c)!r}")
    if np.any(c <= 0):
        raise DataError("concentration direction entries must be positive")


def lod_sweep(
    experiment: ExperimentConfig,
    c_direction: ArrayLike,
    eta_grid: Sequence[float],
    detector: Detector,
    threshold: float = 0.9,
    trials: int = 10,
    seed: int = 0,
    config: PipelineConfig | None = None,
) -> LodCurve:
    """Mean rho per concentration scaling and the smallest scaling that clears ``threshold``.

    For every eta, ``trials`` matrices are synthesized with quantities eta * c
    (trial seeds come from the ``lod`` sub-stream), the detector runs on each,
    and its reconstruction is compared with the noiseless analyte term.

    Raises:
        DataError: For a non-unit direction, a non-increasing grid, or a
            non-positive threshold or trial count.
    """
    config = config or PipelineConfig()
    analytes = experiment.analyte_specs()
    c = np.asarray(c_direction, dtype=float).ravel()
    _check_direction(c, len(analytes))
    etas = np.asarray(list(eta_grid), dtype=float)
    if etas.size == 0 or np.any(etas <= 0) or np.any(np.diff(etas) <= 0):
        raise DataError(f"eta grid must be positive and strictly increasing, got {etas.tolist()}")
    if not threshold > 0:
        raise DataError(f"threshold must be positive, got {threshold}")
    if trials < 1:
        raise DataError(f"trials must be >= 1, got {trials}")

    gt, gf = experiment.grids()
    solvent = experiment.solvent_spec()
    noise = experiment.noise.to_domain()
    config_hash = experiment.config_hash()

    def run(job: tuple[int, int]) -> float:
        i, trial = job
        scaled = [a.with_quantity(float(etas[i] * ck)) for a, ck in zip(analytes, c)]
        y = synthesize(scaled, solvent, noise, gt, gf, derive_seed(seed, "lod", i, trial),
                       clamp=experiment.clamp, config_hash=config_hash)
        result = detector(y, solvent, config)
        truth = y.with_values(y.truth.analyte_matrix)  # type: ignore[union-attr]
        return rho(truth, reconstruct_y(result, gt, gf), "mean")

    jobs = [(i, trial) for i in range(etas.size) for trial in range(trials)]
    values = np.array(parallel_map(run, jobs)).reshape(etas.size, trials)
    rhos = values.mean(axis=1)
    stderr = values.std(axis=1, ddof=1) / np.sqrt(trials) if trials > 1 else np.zeros(etas.size)

    hits = np.flatnonzero(rhos >= threshold)
    eta_star = float(etas[hits[0]]) if hits.size else None
    logger.info("lod sweep: rhos=%s eta*=%s", np.round(rhos, 4).tolist(), eta_star)
    return LodCurve(
        c_direction=c, etas=etas, rhos=rhos, eta_star=eta_star, threshold=float(threshold),
        rho_stderr=stderr, trials=values,
    )


# ------------------------------------------------------------- plot table

def _style(prominence: float, thresholds: np.ndarray) -> str:
    if prominence >= thresholds[0]:
        return "solid"
    if prominence >= thresholds[1]:
        return "dotted"
    return "faint"


def _truth_peak_candidates(truth: Sequence[AnalyteSpec], gf: FrequencyGrid, gt: TimeGrid) -> list[list[PeakCandidate]]:
    out = []
    for a in truth:
        spectrum = a.quantity * a.window.magnitude * analyte_spectrum(a, gf)
        bins = np.array([gf.index_of(p.center) for p in a.peaks], dtype=int)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            prominences, _, _ = signal.peak_prominences(spectrum, bins)
        t_mid = gt.index_of(0.5 * (a.window.origin + a.window.end))
        out.append([
            PeakCandidate(t_index=t_mid, f_index=int(b), intensity=float(spectrum[b]), prominence=float(p))
            for b, p in zip(bins, prominences)
        ])
    return out


def emit_detection_plot_data(
    truth: Sequence[AnalyteSpec],
    result: DetectionResult,
    gf: FrequencyGrid,
    gt: TimeGrid,
    percentiles: Sequence[float] = DEFAULT_PERCENTILES,
) -> list[dict[str, Any]]:
    """Rows behind the truth-versus-estimate overlay plot.

    Columns (``PLOT_COLUMNS``):
        kind: ``band``/``peak`` for the truth, ``est_band``/``est_peak`` for estimates.
        analyte: analyte name, or ``est<k>`` for the k-th detected analyte.
        x0, x1: band start/end time (s), or the peak centre (cm^-1) twice.
        y: lane, the index of the true analyte (estimates use the nearest true origin).
        style: ``band`` for bands; ``solid``/``dotted``/``faint`` for peaks by prominence percentile.
        height: band plateau intensity, or the peak height in the spectrum.
    """
    thresholds_pct = list(percentiles)
    if len(thresholds_pct) != 2 or thresholds_pct[0] < thresholds_pct[1]:
        raise DataError(f"expected (solid, dotted) percentiles in decreasing order, got {thresholds_pct}")
    rows: list[dict[str, Any]] = []
    truth_peaks = _truth_peak_candidates(truth, gf, gt)
    flat = [c for lane in truth_peaks for c in lane]
    truth_thr = prominence_percentiles(flat, thresholds_pct) if flat else None

    for lane, (a, cands) in enumerate(zip(truth, truth_peaks)):
        w = a.window
        rows.append({"kind": "band", "analyte": a.name, "x0": w.origin, "x1": w.end, "y": lane,
                     "style": "band", "height": a.quantity * w.magnitude})
        for p, cand in zip(a.peaks, cands):
            rows.append({"kind": "peak", "analyte": a.name, "x0": p.center, "x1": p.center, "y": lane,
                         "style": _style(cand.prominence, truth_thr), "height": cand.intensity})

    fits = result.fits
    fit_thr = prominence_percentiles([f.candidate for f in fits], thresholds_pct) if fits else None
    origins = np.array([a.window.origin for a in truth])
    for k, det in enumerate(result.analytes):
        o, d = det.centroid
        lane = int(np.argmin(np.abs(origins - o))) if origins.size else k
        name = f"est{k}"
        rows.append({"kind": "est_band", "analyte": name, "x0": o, "x1": o + det.rise + d + det.fall, "y": lane,
                     "style": "band", "height": det.magnitude})
        for fit in det.member_peaks:
            height = fit.mag_hat * float(eval_pseudo_voigt(fit.c_hat, fit.as_peak())) if fit.sigma2_hat > 0 else 0.0
            rows.append({"kind": "est_peak", "analyte": name, "x0": fit.c_hat, "x1": fit.c_hat, "y": lane,
                         "style": _style(fit.candidate.prominence, fit_thr), "height": height})
    return rows
