"""The label-free detector: preprocess, find peaks, fit them, cluster, assemble."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike

from specdetect.cluster import assemble, kmeans, select_k, standardize_points
from specdetect.model.types import ClusterModel, DetectionResult, MeasurementMatrix, PeakCandidate, PeakFit
from specdetect.peakfind import find_peaks_2d
from specdetect.peakfit import fit_all
from specdetect.preprocess import PreprocessResult, preprocess
from specdetect.schemas import PipelineConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PipelineRun:
    """Detection result plus every intermediate product, for dumps and diagnostics."""
    result: DetectionResult
    processed: MeasurementMatrix
    candidates: tuple[PeakCandidate, ...]
    fits: tuple[PeakFit, ...]
    clusters: ClusterModel | None = None
    preprocessing: PreprocessResult | None = None

    @property
    def non_converged(self) -> int:
        return sum(not f.converged for f in self.fits)


def run_from_preprocessed(
    y: MeasurementMatrix, config: PipelineConfig | None = None, preprocessing: PreprocessResult | None = None
) -> PipelineRun:
    """Runs the stages after preprocessing on an already processed matrix."""
    config = config or PipelineConfig()
    started = time.perf_counter()
    candidates = find_peaks_2d(
        y, config.gamma, config.scales, config.min_snr, config.merge_bins, config.min_rows, config.link_snr
    )
    fits = fit_all(y, candidates, config)
    logger.debug("%d candidates, %d fits in %.2fs", len(candidates), len(fits), time.perf_counter() - started)

    if not fits:
        return PipelineRun(DetectionResult.empty(), y, tuple(candidates), (), None, preprocessing)

    points = np.array([[f.o_hat, f.d_hat] for f in fits])
    k = select_k(
        points,
        min(config.k_max, len(fits)),
        config.seed,
        standardize=config.standardize,
        min_separation=config.cluster_tol * y.grid_t.delta_t,
        silhouette_min=config.silhouette_min,
        restarts=config.restarts,
    )
    space = standardize_points(points) if config.standardize else points
    model = kmeans(space, k, config.seed, restarts=config.restarts)
    result = assemble(fits, model, y.grid_f, y.grid_t)
    logger.info("detected %d analytes from %d peak fits", result.k_hat, len(fits))
    return PipelineRun(result, y, tuple(candidates), tuple(fits), model, preprocessing)


def run_label_free(
    y: MeasurementMatrix, solvent_spectrum: ArrayLike | None, config: PipelineConfig | None = None
) -> PipelineRun:
    config = config or PipelineConfig()
    pre = preprocess(y, solvent_spectrum, config)
    return run_from_preprocessed(pre.matrix, config, pre)


def detect(
    y: MeasurementMatrix, solvent_spectrum: ArrayLike | None, config: PipelineConfig | None = None
) -> DetectionResult:
    """Estimates the analytes' spectra and elution patterns from Y alone (plus S)."""
    return run_label_free(y, solvent_spectrum, config).result
