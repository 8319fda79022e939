"""Dimensionality-reduction baseline: truncated PCA plus an oracle rotation.

Y is approximated by U V^T with K-hat components. The factors are only
defined up to an invertible K-hat x K-hat matrix T, since (U T)(V T^-T)^T =
U V^T for every such T. An analyst normally tunes T by hand until U T looks
like physical elution patterns; here T is fitted by least squares against the
ground-truth elution matrix so the baseline runs unattended.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike
from scipy.linalg import null_space

from specdetect.cluster import assemble
from specdetect.exceptions import DataError, DimensionError, NumericalError
from specdetect.model.types import (
    ClusterModel,
    DetectedAnalyte,
    DetectionResult,
    FrequencyGrid,
    MeasurementMatrix,
    PcaModel,
    TimeGrid,
)
from specdetect.peakfind import find_peaks_2d
from specdetect.peakfit import fit_all
from specdetect.schemas import PipelineConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class OracleRotation:
    """Rotation T fitted against the truth.

    Columns ``0 .. assigned-1`` map to the true analytes in order; any further
    columns complete T to a square matrix and are not associated with an
    analyte.
    """
    t: np.ndarray
    assigned: int
    singular: bool

    @property
    def unassigned(self) -> int:
        return int(self.t.shape[1]) - self.assigned


def pca_decompose(y: MeasurementMatrix, k: int, center: bool = False) -> PcaModel:
    """Truncated SVD of (optionally column-centred) Y with k components.

    U carries the singular values and V is orthonormal. Each component's sign
    is fixed so that the largest-magnitude entry of its V column is positive.

    Raises:
        DataError: If k is outside [1, min(N, M)].
    """
    n, m = y.shape
    if not 1 <= k <= min(n, m):
        raise DataError(f"k must lie in [1, {min(n, m)}], got {k}")
    mean_row = y.values.mean(axis=0) if center else np.zeros(m)
    u, s, vt = np.linalg.svd(y.values - mean_row[None, :], full_matrices=False)
    u, s, v = u[:, :k], s[:k], vt[:k].T
    signs = np.sign(v[np.argmax(np.abs(v), axis=0), np.arange(k)])
    signs[signs == 0] = 1.0
    return PcaModel(u=u * (s * signs)[None, :], v=v * signs[None, :], singular_values=s, mean_row=mean_row)


def _is_singular(t: np.ndarray) -> bool:
    return bool(np.linalg.matrix_rank(t) < t.shape[0])


def oracle_rotation(
    model: PcaModel, truth_lambda: ArrayLike, truth_x: ArrayLike | None = None
) -> OracleRotation:
    """T minimising ||U T[:, :K] - Lambda_true||_F, completed to K-hat x K-hat.

    Raises:
        DimensionError: If the truth matrices do not match the model.
        DataError: If the model has fewer components than true analytes.
    """
    lam = np.asarray(truth_lambda, dtype=float)
    if lam.ndim != 2 or lam.shape[0] != model.u.shape[0]:
        raise DimensionError(f"truth elution matrix {lam.shape} does not match U {model.u.shape}")
    n_true = lam.shape[1]
    if truth_x is not None:
        x = np.asarray(truth_x, dtype=float)
        if x.shape != (model.v.shape[0], n_true):
            raise DimensionError(f"truth spectrum matrix {x.shape} does not match V {model.v.shape} and K={n_true}")
    if model.k < n_true:
        raise DataError(f"model has {model.k} components but the truth has {n_true} analytes")

    t_ls, *_ = np.linalg.lstsq(model.u, lam, rcond=None)
    if model.k > n_true:
        complement = null_space(t_ls.T)
        pad = complement[:, : model.k - n_true]
        if pad.shape[1] < model.k - n_true:
            pad = np.hstack([pad, np.zeros((model.k, model.k - n_true - pad.shape[1]))])
        t = np.hstack([t_ls, pad])
    else:
        t = t_ls
    singular = _is_singular(t)
    if singular:
        logger.warning("oracle rotation is singular (rank-deficient truth); a pseudo-inverse will be used")
    return OracleRotation(t=t, assigned=n_true, singular=singular)


def reconstruct_components(
    model: PcaModel, t_matrix: ArrayLike, allow_pinv: bool = False
) -> tuple[np.ndarray, np.ndarray]:
    """Rotated factors (Lambda-hat = U T, X-hat = V T^-T).

    Raises:
        DimensionError: If T is not K-hat x K-hat.
        NumericalError: If T is singular and ``allow_pinv`` is false.
    """
    t = np.asarray(t_matrix, dtype=float)
    if t.shape != (model.k, model.k):
        raise DimensionError(f"rotation must be {model.k}x{model.k}, got {t.shape}")
    if _is_singular(t):
        if not allow_pinv:
            raise NumericalError("rotation matrix is singular")
        t_inv = np.linalg.pinv(t)
    else:
        t_inv = np.linalg.inv(t)
    return model.u @ t, model.v @ t_inv.T


def _corr(a: np.ndarray, b: np.ndarray) -> float:
    if np.std(a) == 0 or np.std(b) == 0:
        return 0.0
    return float(np.corrcoef(a, b)[0, 1])


def rotation_report(
    lambda_hat: np.ndarray, x_hat: np.ndarray, truth_lambda: ArrayLike, truth_x: ArrayLike | None = None
) -> list[dict[str, float | int | None]]:
    """Per assigned component: correlation with the true elution (and spectrum)."""
    lam = np.asarray(truth_lambda, dtype=float)
    xs = None if truth_x is None else np.asarray(truth_x, dtype=float)
    report = []
    for k in range(lam.shape[1]):
        report.append({
            "component": k,
            "elution_corr": _corr(lambda_hat[:, k], lam[:, k]),
            "spectrum_corr": None if xs is None else _corr(x_hat[:, k], xs[:, k]),
        })
    return report


def _component_analyte(
    lam_k: np.ndarray, x_k: np.ndarray, gt: TimeGrid, gf: FrequencyGrid, config: PipelineConfig
) -> DetectedAnalyte:
    if lam_k.sum() < 0:
        lam_k, x_k = -lam_k, -x_k
    comp = MeasurementMatrix(grid_t=gt, grid_f=gf, values=np.outer(lam_k, x_k))
    candidates = find_peaks_2d(
        comp, config.gamma, config.scales, config.min_snr, config.merge_bins, config.min_rows, config.link_snr
    )
    fits = fit_all(comp, candidates, config)
    if fits:
        pairs = np.array([[f.o_hat, f.d_hat] for f in fits])
        single = ClusterModel(
            k_hat=1, centroids=pairs.mean(axis=0, keepdims=True), assignments=np.zeros(len(fits), dtype=int),
            inertia=float(np.sum((pairs - pairs.mean(axis=0)) ** 2)),
        )
        return assemble(fits, single, gf, gt).analytes[0]
    logger.debug("no peaks fitted on a rotated component; keeping its raw factors")
    return DetectedAnalyte(
        spectrum_hat=np.clip(x_k, 0.0, None), elution_hat=np.clip(lam_k, 0.0, None), member_peaks=()
    )


def pca_detection_result(
    model: PcaModel,
    rotation: OracleRotation,
    gt: TimeGrid,
    gf: FrequencyGrid,
    config: PipelineConfig | None = None,
) -> DetectionResult:
    """Turns the assigned rotated components into analytes.

    Each component's rank-one surface outer(lambda-hat_k, x-hat_k) is searched
    and fitted with the same peak models as the label-free detector, so both
    routes yield comparable parameter sets.
    """
    config = config or PipelineConfig()
    lambda_hat, x_hat = reconstruct_components(model, rotation.t, allow_pinv=rotation.singular)
    analytes = tuple(
        _component_analyte(lambda_hat[:, k], x_hat[:, k], gt, gf, config) for k in range(rotation.assigned)
    )
    return DetectionResult(k_hat=len(analytes), analytes=analytes)
