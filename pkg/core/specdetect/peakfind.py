"""Two-dimensional peak candidates from a preprocessed measurement matrix.

Each time row is searched independently with a continuous wavelet transform
(Mexican-hat kernel). Row detections that persist at nearly the same
frequency over consecutive rows are linked into tracks; every track becomes
one candidate, and the sensitivity level gamma filters on the candidate's
intensity.
"""

from __future__ import annotations

import logging
import math
import warnings
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike
from scipy import signal

from specdetect.exceptions import DataError
from specdetect.model.types import MeasurementMatrix, PeakCandidate
from specdetect.runtime import parallel_map

logger = logging.getLogger(__name__)

DEFAULT_SCALES: tuple[float, ...] = (1.0, 2.0, 4.0, 8.0, 16.0)
_MAD_TO_SIGMA = 1.4826
_LOCAL_MAX_SNR = 3.0


def _check_scales(scales: Sequence[float]) -> np.ndarray:
    widths = np.asarray(list(scales), dtype=float)
    if widths.size == 0 or np.any(widths <= 0):
        raise DataError(f"wavelet scales must be a non-empty list of positive numbers, got {list(scales)}")
    return np.sort(widths)


def _is_local_max(x: np.ndarray, i: int) -> bool:
    left = x[i - 1] if i > 0 else -np.inf
    right = x[i + 1] if i < x.size - 1 else -np.inf
    return x[i] >= left and x[i] >= right and (x[i] > left or x[i] > right)


def find_peaks_1d_cwt(signal_in: ArrayLike, scales: Sequence[float], min_snr: float) -> list[tuple[int, float]]:
    """Finds peaks of a 1-D signal along ridge lines of its wavelet transform.

    Ridge positions are snapped to the nearest local maximum of the signal
    (within one smallest scale), so the reported index is the mode of the
    peak. Local maxima away from every ridge are added when their prominence
    reaches ``max(min_snr, 3)`` times the signal's noise level; ridge lines
    can break on exactly symmetric noiseless rows. Maxima without positive
    prominence are dropped.

    Args:
        signal_in: Signal samples.
        scales: Wavelet widths in bins.
        min_snr: Minimum ridge signal-to-noise ratio.

    Returns:
        (index, prominence) pairs sorted by index.
    """
    widths = _check_scales(scales)
    x = np.asarray(signal_in, dtype=float).ravel()
    if x.size < 3 or np.ptp(x) == 0.0:
        return []

    reach = int(math.ceil(widths[0])) + 1
    snapped: set[int] = set()
    for r in signal.find_peaks_cwt(x, widths, min_snr=min_snr):
        lo = max(int(r) - reach, 0)
        hi = min(int(r) + reach + 1, x.size)
        i = lo + int(np.argmax(x[lo:hi]))
        if _is_local_max(x, i):
            snapped.add(i)

    tol = 1e-9 * float(np.max(np.abs(x)))
    floor = max(max(min_snr, _LOCAL_MAX_SNR) * noise_level(x), tol)
    local, _ = signal.find_peaks(x, prominence=floor, distance=reach)
    for i in local:
        if all(abs(int(i) - j) > reach for j in snapped):
            snapped.add(int(i))
    if not snapped:
        return []

    idx = np.array(sorted(snapped), dtype=int)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        prominences, _, _ = signal.peak_prominences(x, idx)
    return [(int(i), float(p)) for i, p in zip(idx, prominences) if p > tol]


@dataclass
class _Track:
    rows: list[int] = field(default_factory=list)
    bins: list[int] = field(default_factory=list)
    values: list[float] = field(default_factory=list)
    prominences: list[float] = field(default_factory=list)

    @property
    def last_row(self) -> int:
        return self.rows[-1]

    @property
    def last_bin(self) -> int:
        return self.bins[-1]

    def add(self, row: int, fbin: int, value: float, prominence: float) -> None:
        self.rows.append(row)
        self.bins.append(fbin)
        self.values.append(value)
        self.prominences.append(prominence)


def noise_level(values: np.ndarray) -> float:
    """Robust noise scale from sample-to-sample differences along the first axis."""
    if values.shape[0] < 2:
        return 0.0
    diffs = np.abs(np.diff(values, axis=0))
    return float(_MAD_TO_SIGMA * np.median(diffs) / math.sqrt(2.0))


def _link_rows(
    detections: list[list[tuple[int, float]]], values: np.ndarray, floor: float, merge_bins: int
) -> list[_Track]:
    tracks: list[_Track] = []
    active: list[_Track] = []
    for row, found in enumerate(detections):
        kept = [(i, p) for i, p in found if values[row, i] >= floor]
        kept.sort(key=lambda ip: -values[row, ip[0]])
        alive = [t for t in active if t.last_row == row - 1]
        extended: set[int] = set()
        nxt: list[_Track] = []
        for fbin, prom in kept:
            best = None
            for k, t in enumerate(alive):
                if k in extended or abs(t.last_bin - fbin) > merge_bins:
                    continue
                if best is None or abs(t.last_bin - fbin) < abs(alive[best].last_bin - fbin):
                    best = k
            if best is None:
                track = _Track()
                tracks.append(track)
            else:
                extended.add(best)
                track = alive[best]
            track.add(row, fbin, float(values[row, fbin]), prom)
            nxt.append(track)
        active = nxt
    return tracks


def _track_candidate(track: _Track) -> PeakCandidate:
    vals = np.asarray(track.values)
    peak = float(vals.max())
    # Centroid over the track core.
    core = vals >= 0.5 * peak
    w = vals[core]
    rows = np.asarray(track.rows)[core]
    bins = np.asarray(track.bins)[core]
    t_c = float(np.sum(w * rows) / np.sum(w))
    f_c = float(np.sum(w * bins) / np.sum(w))
    top = int(np.argmax(vals))
    return PeakCandidate(
        t_index=int(round(t_c)),
        f_index=int(round(f_c)),
        intensity=peak,
        prominence=float(track.prominences[top]),
        t_start=int(rows.min()),
        t_stop=int(rows.max()),
    )


def find_peaks_2d(
    y: MeasurementMatrix,
    gamma: float,
    scales: Sequence[float] = DEFAULT_SCALES,
    min_snr: float = 1.0,
    merge_bins: int = 2,
    min_rows: int = 2,
    link_snr: float = 3.0,
) -> list[PeakCandidate]:
    """Detects 2-D peaks of ``y`` whose intensity reaches ``gamma``.

    Args:
        y: Preprocessed matrix.
        gamma: Sensitivity level applied to the candidate intensity.
        scales: Wavelet widths in frequency bins.
        min_snr: Minimum ridge SNR of the row detector.
        merge_bins: Frequency tolerance when linking consecutive rows.
        min_rows: Minimum number of consecutive rows of a track.
        link_snr: Row detections below ``link_snr`` times the estimated noise
            level are not linked into tracks. Independent of ``gamma``.

    Returns:
        Candidates sorted by (t_index, f_index), distinct in both.

    Raises:
        DataError: If ``gamma`` is negative or the scales are invalid.
    """
    if gamma < 0:
        raise DataError(f"gamma must be >= 0, got {gamma}")
    _check_scales(scales)
    values = y.values

    def detect_row(row: int) -> list[tuple[int, float]]:
        x = values[row]
        if not np.any(x > 0):
            return []
        return find_peaks_1d_cwt(x, scales, min_snr)

    detections = parallel_map(detect_row, range(values.shape[0]))
    floor = max(link_snr * noise_level(values), 0.0)
    tracks = [t for t in _link_rows(detections, values, floor, merge_bins) if len(t.rows) >= min_rows]

    by_position: dict[tuple[int, int], PeakCandidate] = {}
    for track in tracks:
        cand = _track_candidate(track)
        if cand.intensity < gamma:
            continue
        key = (cand.t_index, cand.f_index)
        if key not in by_position or by_position[key].intensity < cand.intensity:
            by_position[key] = cand

    out = [by_position[k] for k in sorted(by_position)]
    logger.debug("find_peaks_2d: %d tracks, %d candidates at gamma=%g (link floor %.3g)",
                 len(tracks), len(out), gamma, floor)
    return out


def prominence_percentiles(candidates: Sequence[PeakCandidate], percentiles: Sequence[float]) -> np.ndarray:
    """Nearest-rank percentiles of the candidates' prominences.

    Raises:
        DataError: If ``candidates`` is empty or a percentile is outside [0, 100].
    """
    if not candidates:
        raise DataError("prominence percentiles need at least one candidate")
    q = np.asarray(list(percentiles), dtype=float)
    if np.any((q < 0) | (q > 100)):
        raise DataError(f"percentiles must lie in [0, 100], got {list(percentiles)}")
    prom = np.array([c.prominence for c in candidates], dtype=float)
    return np.percentile(prom, q, method="inverted_cdf")
