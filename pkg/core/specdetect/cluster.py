"""Grouping of fitted peaks into analytes.

Peaks that belong to the same compound share its elution window, so their
fitted (origin, duration) pairs coincide up to fitting error. k-means over
those pairs labels the peaks; the number of clusters is chosen by the mean
silhouette.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence

import numpy as np
from numpy.typing import ArrayLike
from scipy.cluster.hierarchy import fcluster, linkage
from sklearn.cluster import kmeans_plusplus
from sklearn.metrics import silhouette_score

from specdetect.exceptions import DataError
from specdetect.model.lineshapes import eval_pseudo_voigt, window_profile
from specdetect.model.types import (
    ClusterModel,
    DetectedAnalyte,
    DetectionResult,
    ElutionWindow,
    FrequencyGrid,
    PeakFit,
    TimeGrid,
)
from specdetect.runtime import derive_seed, parallel_map

logger = logging.getLogger(__name__)

MAX_LLOYD_ITER = 300
DEFAULT_RESTARTS = 20
SILHOUETTE_MIN = 0.5


def _as_points(points: ArrayLike) -> np.ndarray:
    x = np.asarray(points, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1) if x.size else x.reshape(0, 2)
    return x


def _means(x: np.ndarray, assign: np.ndarray, k: int) -> np.ndarray:
    return np.vstack([x[assign == j].mean(axis=0) for j in range(k)])


def _fill_empty(x: np.ndarray, assign: np.ndarray, centers: np.ndarray, k: int) -> np.ndarray:
    """Moves the point farthest from its centre into each empty cluster."""
    assign = assign.copy()
    for j in range(k):
        if np.any(assign == j):
            continue
        sizes = np.bincount(assign, minlength=k)
        dist = np.sum((x - centers[assign]) ** 2, axis=1)
        dist[sizes[assign] <= 1] = -1.0
        assign[int(np.argmax(dist))] = j
    return assign


def _nearest(x: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d2 = np.sum((x[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    return d2.argmin(axis=1), d2


def _lloyd(x: np.ndarray, k: int, seed: int, max_iter: int) -> tuple[np.ndarray, np.ndarray, float, list[float]]:
    centers, _ = kmeans_plusplus(x, k, random_state=seed)
    assign, _ = _nearest(x, centers)
    trace: list[float] = []
    for _ in range(max_iter):
        assign = _fill_empty(x, assign, centers, k)
        centers = _means(x, assign, k)
        trace.append(float(np.sum((x - centers[assign]) ** 2)))
        new, _ = _nearest(x, centers)
        if np.array_equal(new, assign):
            break
        assign = new
    assign = _fill_empty(x, assign, centers, k)
    centers = _means(x, assign, k)
    inertia = float(np.sum((x - centers[assign]) ** 2))
    return centers, assign, inertia, trace


def kmeans(
    points: ArrayLike,
    k: int,
    seed: int,
    restarts: int = DEFAULT_RESTARTS,
    max_iter: int = MAX_LLOYD_ITER,
) -> ClusterModel:
    """Seeded k-means with k-means++ starts; the lowest-inertia restart wins.

    Args:
        points: (n, dims) array, typically fitted (origin, duration) pairs.
        k: Number of clusters, 1 <= k <= n.
        seed: Master seed; restart r uses the ``kmeans`` sub-stream r.
        restarts: Independent restarts.
        max_iter: Lloyd iteration cap per restart.

    Raises:
        DataError: If k is outside [1, n].
    """
    x = _as_points(points)
    n = x.shape[0]
    if not 1 <= k <= n:
        raise DataError(f"k must lie in [1, {n}], got {k}")

    def run(r: int) -> tuple[np.ndarray, np.ndarray, float, list[float]]:
        return _lloyd(x, k, derive_seed(seed, "kmeans", r), max_iter)

    runs = parallel_map(run, range(max(restarts, 1)))
    best = min(range(len(runs)), key=lambda r: (runs[r][2], r))
    centers, assign, inertia, trace = runs[best]
    return ClusterModel(
        k_hat=k, centroids=centers, assignments=assign, inertia=inertia, trace=tuple(trace), restart=best
    )


def count_groups(points: ArrayLike, min_separation: float) -> int:
    """Number of single-linkage groups at distance ``min_separation`` (0: distinct points)."""
    x = _as_points(points)
    if x.shape[0] == 0:
        return 0
    if min_separation <= 0:
        return int(np.unique(x, axis=0).shape[0])
    if x.shape[0] == 1:
        return 1
    labels = fcluster(linkage(x, method="single"), t=min_separation, criterion="distance")
    return int(np.unique(labels).size)


def standardize_points(x: np.ndarray) -> np.ndarray:
    std = x.std(axis=0)
    std[std == 0] = 1.0
    return (x - x.mean(axis=0)) / std


def select_k(
    points: ArrayLike,
    k_max: int,
    seed: int,
    standardize: bool = False,
    min_separation: float = 0.0,
    silhouette_min: float = SILHOUETTE_MIN,
    restarts: int = DEFAULT_RESTARTS,
) -> int:
    """Picks the cluster count with the highest mean silhouette.

    Candidates are k = 2 .. min(k_max, n - 1, g), where g counts the groups
    of points separated by more than ``min_separation``. Returns 1 when the
    best silhouette stays below ``silhouette_min`` or all points coincide, and
    n when there are fewer than two points.
    """
    x = _as_points(points)
    n = x.shape[0]
    if n < 2:
        return n
    groups = count_groups(x, min_separation)
    if groups < 2:
        return 1
    if standardize:
        x = standardize_points(x)
    upper = min(k_max, n - 1, groups)
    if upper < 2:
        return groups if n == 2 else 1

    scores: dict[int, float] = {}
    for k in range(2, upper + 1):
        model = kmeans(x, k, seed, restarts=restarts)
        scores[k] = float(silhouette_score(x, model.assignments))
    best = max(scores, key=lambda k: (scores[k], -k))
    logger.debug("select_k: silhouettes %s -> %d", {k: round(v, 4) for k, v in scores.items()}, best)
    return best if scores[best] >= silhouette_min else 1


def assemble(fits: Sequence[PeakFit], model: ClusterModel, gf: FrequencyGrid, gt: TimeGrid) -> DetectionResult:
    """Builds one analyte per cluster from its member peaks.

    The spectrum is the sum of the members' unit-area lines weighted by
    mag_i / mean(mag); the elution pattern is the window at the members'
    mean (origin, duration) with median rise and fall, scaled by mean(mag).
    Their outer product therefore reproduces the fitted surfaces. This departs
    from scaling each line by mag_i and the window by mean(mag) as well; that
    product would be larger by a factor mean(mag).

    Raises:
        DataError: If the assignments do not cover ``fits``.
    """
    if not fits:
        return DetectionResult.empty()
    assign = np.asarray(model.assignments, dtype=int)
    if assign.shape != (len(fits),):
        raise DataError(f"{assign.size} cluster assignments for {len(fits)} fits")

    pairs = np.array([[f.o_hat, f.d_hat] for f in fits])
    labels = [j for j in range(model.k_hat) if np.any(assign == j)]
    order = sorted(labels, key=lambda j: tuple(pairs[assign == j].mean(axis=0)))
    axis_f = gf.axis

    analytes = []
    for j in order:
        members = tuple(f for f, a in zip(fits, assign) if a == j)
        mags = np.array([f.mag_hat for f in members])
        mean_mag = float(mags.mean())
        spectrum = np.zeros(gf.m)
        if mean_mag > 0:
            for fit, mag in zip(members, mags):
                spectrum += (mag / mean_mag) * np.asarray(eval_pseudo_voigt(axis_f, fit.as_peak()))
        o_c, d_c = pairs[assign == j].mean(axis=0)
        rise = float(np.median([f.alpha_hat for f in members]))
        fall = float(np.median([f.beta_hat for f in members]))
        if mean_mag > 0:
            window = ElutionWindow(origin=max(float(o_c), 0.0), duration=max(float(d_c), 0.0),
                                   rise=rise, fall=fall, magnitude=mean_mag)
            elution = window_profile(window, gt)
        else:
            elution = np.zeros(gt.n)
        analytes.append(
            DetectedAnalyte(
                spectrum_hat=spectrum,
                elution_hat=elution,
                member_peaks=members,
                centroid=(float(o_c), float(d_c)),
                rise=rise,
                fall=fall,
                magnitude=mean_mag,
            )
        )
    return DetectionResult(k_hat=len(analytes), analytes=tuple(analytes))
