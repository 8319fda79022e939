"""Preprocessing of measurement matrices before peak detection.

The stage removes what the detector must not see: cosmic impulses (optional),
the solvent contribution (per-row regression onto the known solvent
spectrum), the slowly varying fluorescence background (positive-MSE
polynomial under the time-averaged residual), and high-frequency noise
(Savitzky-Golay smoothing).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as P
from numpy.typing import ArrayLike
from scipy import optimize, signal
from scipy.linalg import solve_triangular

from specdetect.exceptions import DataError, DimensionError
from specdetect.model.noise import normalized_axis
from specdetect.model.types import BaselineFit, FrequencyGrid, MeasurementMatrix
from specdetect.schemas import PipelineConfig

logger = logging.getLogger(__name__)

MODPOLY_MAX_ITER = 50
_MAD_TO_SIGMA = 1.4826


@dataclass(frozen=True, eq=False)
class PreprocessResult:
    """Processed matrix plus the artefacts of each stage."""
    matrix: MeasurementMatrix
    solvent_coeffs: np.ndarray
    baseline: BaselineFit | None = None
    despiked_cells: int = 0


def _least_distance(q: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Solves min ||z|| subject to q @ z >= h through an NNLS dual.

    Raises:
        RuntimeError: If the NNLS solver hits its iteration limit.
    """
    n = q.shape[1]
    e = np.vstack([q.T, h[None, :]])
    f = np.zeros(n + 1)
    f[-1] = 1.0
    u, _ = optimize.nnls(e, f, maxiter=50 * e.shape[1])
    r = e @ u - f
    # The constant column keeps the problem feasible, so r[-1] stays away from zero.
    return -r[:n] / r[-1]


def _modpoly(y: np.ndarray, vander: np.ndarray) -> tuple[np.ndarray, int, bool]:
    """Iteratively clipped polynomial fit; fallback when the exact solve fails."""
    work = y.copy()
    coeffs = np.zeros(vander.shape[1])
    for it in range(1, MODPOLY_MAX_ITER + 1):
        coeffs, *_ = np.linalg.lstsq(vander, work, rcond=None)
        fitted = vander @ coeffs
        if np.all(fitted <= y + 1e-12 * (1.0 + np.abs(y))):
            return coeffs, it, True
        work = np.minimum(work, fitted)
    return coeffs, MODPOLY_MAX_ITER, False


def remove_fluorescence(spectrum: ArrayLike, degree: int) -> tuple[np.ndarray, BaselineFit]:
    """Fits the positive-MSE polynomial baseline and subtracts it.

    The loss is the squared error where the signal lies above the baseline and
    infinite elsewhere, i.e. a least-squares fit under the hard constraint
    baseline <= spectrum at every bin. Coefficients refer to the frequency
    axis normalised to [0, 1], lowest order first.

    Returns:
        (corrected, fit) with corrected = spectrum - baseline >= 0.

    Raises:
        DataError: If ``degree`` is negative or not below the spectrum length.
    """
    y = np.asarray(spectrum, dtype=float).ravel()
    m = y.size
    if degree < 0 or degree >= m:
        raise DataError(f"baseline degree must lie in [0, {m - 1}], got {degree}")

    x = normalized_axis(FrequencyGrid(f_min=0.0, delta_f=1.0, m=m))
    vander = P.polyvander(x, degree)
    converged = True
    iterations = 1
    try:
        q, r = np.linalg.qr(vander)
        qty = q.T @ y
        z = _least_distance(q, -(y - q @ qty))
        coeffs = solve_triangular(r, qty - z)
    except (RuntimeError, np.linalg.LinAlgError) as exc:
        logger.warning("exact baseline solve failed (%s); falling back to clipped refits", exc)
        coeffs, iterations, converged = _modpoly(y, vander)

    baseline = vander @ coeffs
    violation = float(np.max(baseline - y))
    if violation > 0:
        # Lower the constant term so the constraint holds to rounding.
        coeffs = coeffs.copy()
        coeffs[0] -= violation
        baseline = baseline - violation
    corrected = np.clip(y - baseline, 0.0, None)
    loss = float(np.sum((y - baseline) ** 2))
    fit = BaselineFit(
        coeffs=tuple(float(c) for c in coeffs),
        degree=degree,
        loss=loss,
        converged=converged,
        iterations=iterations,
    )
    return corrected, fit


def baseline_values(fit: BaselineFit, m: int) -> np.ndarray:
    """Evaluates a fitted baseline on an m-bin axis."""
    return P.polyval(normalized_axis(FrequencyGrid(f_min=0.0, delta_f=1.0, m=m)), np.asarray(fit.coeffs))


def subtract_solvent(y: MeasurementMatrix, solvent_spectrum: ArrayLike) -> tuple[MeasurementMatrix, np.ndarray]:
    """Regresses every time row onto the solvent spectrum and removes it.

    coeffs[j] = max(<Y_j, S> / <S, S>, 0); residual row = Y_j - coeffs[j] * S.

    Raises:
        DimensionError: If the spectrum length differs from the frequency grid.
        DataError: If the solvent spectrum has zero norm.
    """
    s = np.asarray(solvent_spectrum, dtype=float).ravel()
    if s.size != y.grid_f.m:
        raise DimensionError(f"solvent spectrum has {s.size} bins, matrix has {y.grid_f.m}")
    energy = float(s @ s)
    if energy == 0.0:
        raise DataError("solvent spectrum has zero norm")
    coeffs = (y.values @ s) / energy
    negative = int(np.sum(coeffs < 0))
    if negative:
        logger.warning("clamped %d negative solvent coefficients to zero", negative)
        coeffs = np.clip(coeffs, 0.0, None)
    residual = y.values - np.outer(coeffs, s)
    return y.with_values(residual), coeffs


def savitzky_golay(signal_in: ArrayLike, window: int, order: int, axis: int = -1) -> np.ndarray:
    """Savitzky-Golay smoothing; edges use the fit of the first/last full window.

    Raises:
        DataError: For an even or too-long window, or order >= window.
    """
    x = np.asarray(signal_in, dtype=float)
    if window < 1 or window % 2 == 0:
        raise DataError(f"Savitzky-Golay window must be a positive odd integer, got {window}")
    if not 0 <= order < window:
        raise DataError(f"Savitzky-Golay order must lie in [0, {window - 1}], got {order}")
    if x.shape[axis] < window:
        raise DataError(f"signal length {x.shape[axis]} is shorter than the window {window}")
    return signal.savgol_filter(x, window, order, axis=axis, mode="interp")


def despike_cosmic(y: MeasurementMatrix, z_threshold: float = 8.0) -> MeasurementMatrix:
    """Replaces single-sample positive temporal outliers by the mean of their neighbours.

    A sample is a spike when it exceeds both temporal neighbours by more than
    ``z_threshold`` times the larger of the column's noise level (from first
    differences) and the slopes just outside the neighbours. Smooth maxima
    never qualify, so spike-free data is returned unchanged.
    """
    return _despike(y, z_threshold)[0]


def _despike(y: MeasurementMatrix, z_threshold: float) -> tuple[MeasurementMatrix, int]:
    if not z_threshold > 0:
        raise DataError(f"z_threshold must be positive, got {z_threshold}")
    values = y.values
    n = values.shape[0]
    if n < 3:
        return y, 0
    steps = np.abs(np.diff(values, axis=0))
    noise = _MAD_TO_SIGMA * np.median(steps, axis=0) / math.sqrt(2.0)
    floor = 1e-12 * (1.0 + np.abs(values).max(axis=0))

    # Slope just outside the neighbours: |x[i-1] - x[i-2]| and |x[i+2] - x[i+1]|.
    slope = np.zeros_like(values)
    slope[2:] = steps[:-1]
    slope[:n - 2] = np.maximum(slope[:n - 2], steps[1:])
    scale = np.maximum(np.maximum(slope, noise[None, :]), floor[None, :])

    excess = np.full_like(values, -np.inf)
    excess[1:-1] = values[1:-1] - np.maximum(values[:-2], values[2:])
    spikes = excess > z_threshold * scale
    count = int(spikes.sum())
    if not count:
        return y, 0
    neighbours = values.copy()
    neighbours[1:-1] = 0.5 * (values[:-2] + values[2:])
    logger.debug("despike: replaced %d cells", count)
    return y.with_values(np.where(spikes, neighbours, values)), count


def preprocess(
    y: MeasurementMatrix, solvent_spectrum: ArrayLike | None, config: PipelineConfig | None = None
) -> PreprocessResult:
    """Runs despike (optional), solvent subtraction, fluorescence removal and smoothing.

    A ``None`` solvent spectrum skips the subtraction (coefficients are zero).
    """
    config = config or PipelineConfig()
    despiked = 0
    if config.despike:
        y, despiked = _despike(y, config.despike_z)

    if solvent_spectrum is None:
        residual, coeffs = y, np.zeros(y.grid_t.n)
    else:
        residual, coeffs = subtract_solvent(y, solvent_spectrum)
    values = residual.values

    fit: BaselineFit | None = None
    if config.fluorescence_degree is not None and config.fluorescence_degree < y.grid_f.m:
        _, fit = remove_fluorescence(values.mean(axis=0), config.fluorescence_degree)
        # Clip the envelope at zero.
        values = values - np.clip(baseline_values(fit, y.grid_f.m), 0.0, None)[None, :]

    if config.sg_window > 1:
        values = savitzky_golay(values, config.sg_window, config.sg_order, axis=1)
        if config.smooth_axis == "both" and values.shape[0] >= config.sg_window:
            values = savitzky_golay(values, config.sg_window, config.sg_order, axis=0)

    logger.debug("preprocess: %s matrix, %d despiked cells", values.shape, despiked)
    return PreprocessResult(matrix=y.with_values(values), solvent_coeffs=coeffs, baseline=fit, despiked_cells=despiked)
