"""Stochastic and background terms of the extended measurement model.

Shot noise is a Poisson count per cell, cosmic noise a sparse impulse train
per frequency band, fluorescence a low-degree polynomial over frequency.
"""

from __future__ import annotations

import numpy as np
from numpy.polynomial import polynomial as P
from numpy.typing import ArrayLike

from specdetect.exceptions import DataError
from specdetect.model.types import FrequencyGrid, TimeGrid

SeedLike = int | np.random.Generator


def _rng(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_shot_noise(rate_matrix: ArrayLike, seed: SeedLike) -> np.ndarray:
    """Draws one Poisson count per cell with mean equal to the cell's rate.

    Raises:
        DataError: If any rate is negative.
    """
    rates = np.asarray(rate_matrix, dtype=float)
    if np.any(rates < 0):
        raise DataError("shot-noise rates must be nonnegative")
    return _rng(seed).poisson(rates).astype(float)


def sample_cosmic_noise(
    gt: TimeGrid,
    gf: FrequencyGrid,
    amplitude: float,
    rate: float,
    seed: SeedLike,
) -> np.ndarray:
    """Places impulses of ``amplitude`` with exponential gaps of mean 1/rate seconds.

    Each frequency column gets an independent impulse train over [0, T); an
    impulse marks the time sample containing it.
    """
    if amplitude < 0 or rate < 0:
        raise DataError("cosmic amplitude and rate must be nonnegative")
    out = np.zeros((gt.n, gf.m))
    if amplitude == 0 or rate == 0:
        return out
    rng = _rng(seed)
    horizon = gt.duration
    scale = 1.0 / rate
    for col in range(gf.m):
        t = rng.exponential(scale)
        while t < horizon:
            out[min(int(t / gt.delta_t), gt.n - 1), col] = amplitude
            t += rng.exponential(scale)
    return out


def normalized_axis(gf: FrequencyGrid) -> np.ndarray:
    """Frequency axis mapped onto [0, 1]."""
    if gf.m == 1:
        return np.zeros(1)
    return np.arange(gf.m, dtype=float) / (gf.m - 1)


def fluorescence_background(degree: int, coeffs: ArrayLike, gf: FrequencyGrid) -> np.ndarray:
    """Evaluates sum_i coeffs[i] * x**i over the normalised axis, clamped at zero.

    Raises:
        DataError: If ``coeffs`` is empty or its length disagrees with ``degree``.
    """
    c = np.asarray(coeffs, dtype=float).ravel()
    if c.size == 0:
        raise DataError("fluorescence coefficients must not be empty")
    if degree != c.size - 1:
        raise DataError(f"fluorescence degree {degree} needs {degree + 1} coefficients, got {c.size}")
    return np.clip(P.polyval(normalized_axis(gf), c), 0.0, None)
