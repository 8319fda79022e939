"""Detectors shipped with specdetect.

A detector is any callable ``(y, solvent, config) -> DetectionResult``; the
LOD sweep and the CLI look them up by name through
``specdetect.detectors.loader``.
"""

from __future__ import annotations

import logging

import numpy as np

from specdetect.exceptions import DataError
from specdetect.model.forward import elution_matrix, spectrum_matrix
from specdetect.model.types import DetectionResult, MeasurementMatrix, SolventSpec
from specdetect.pca import oracle_rotation, pca_decompose, pca_detection_result
from specdetect.pipeline import detect
from specdetect.schemas import PipelineConfig

logger = logging.getLogger(__name__)


def label_free(y: MeasurementMatrix, solvent: SolventSpec, config: PipelineConfig) -> DetectionResult:
    """Peak-based detector; needs nothing but Y and the solvent spectrum."""
    spectrum = solvent.spectrum if np.any(solvent.spectrum > 0) else None
    return detect(y, spectrum, config)


def pca_oracle(y: MeasurementMatrix, solvent: SolventSpec, config: PipelineConfig) -> DetectionResult:
    """PCA with the rotation fitted against the attached ground truth.

    Raises:
        DataError: If ``y`` carries no ground truth.
    """
    truth = y.truth
    if truth is None:
        raise DataError("the pca_oracle detector needs a synthesized matrix with ground truth")
    if not truth.analytes:
        return DetectionResult.empty()
    with_solvent = bool(np.any(solvent.spectrum > 0) and np.any(solvent.elution > 0))
    k = config.pca_k or len(truth.analytes) + int(with_solvent)
    k = min(max(k, len(truth.analytes)), min(y.shape))
    model = pca_decompose(y, k, center=config.pca_center)
    rotation = oracle_rotation(
        model,
        elution_matrix(truth.analytes, y.grid_t),
        spectrum_matrix(truth.analytes, y.grid_f),
    )
    return pca_detection_result(model, rotation, y.grid_t, y.grid_f, config)
