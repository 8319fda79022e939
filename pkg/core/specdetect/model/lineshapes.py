"""Spectral line shape and elution window of the forward model.

Both functions are vectorised over their first argument and accept scalars.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.typing import ArrayLike

from specdetect.model.types import ElutionWindow, FrequencyGrid, PseudoVoigtPeak, TimeGrid

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def gaussian_density(f: ArrayLike, center: float, sigma2: float) -> np.ndarray:
    u = np.asarray(f, dtype=float) - center
    return np.exp(-(u * u) / (2.0 * sigma2)) / (_SQRT_2PI * math.sqrt(sigma2))


def lorentzian_density(f: ArrayLike, center: float, gamma: float) -> np.ndarray:
    u = np.asarray(f, dtype=float) - center
    return gamma / (math.pi * (u * u + gamma * gamma))


def eval_pseudo_voigt(f: ArrayLike, peak: PseudoVoigtPeak) -> np.ndarray | float:
    """Evaluates A * [nu * Gauss(f; c, sigma2) + (1 - nu) * Lorentz(f; c, gamma)].

    Both densities have unit area, so the line has area ``peak.amplitude``.
    """
    value = peak.amplitude * (
        peak.nu * gaussian_density(f, peak.center, peak.sigma2)
        + (1.0 - peak.nu) * lorentzian_density(f, peak.center, peak.gamma)
    )
    return float(value) if np.ndim(f) == 0 else value


def eval_elution_window(t: ArrayLike, w: ElutionWindow) -> np.ndarray | float:
    """Evaluates the trigonometric elution window at time(s) ``t``.

    The rise branch covers o < t <= o + rise, the plateau o + rise < t <= o +
    rise + duration, the fall the remaining ``fall`` seconds; zero elsewhere.
    """
    tt = np.asarray(t, dtype=float)
    o, a, d, b, mag = w.origin, w.rise, w.duration, w.fall, w.magnitude
    rise_end = o + a
    plateau_end = rise_end + d
    end = plateau_end + b

    in_rise = (tt > o) & (tt <= rise_end)
    in_plateau = (tt > rise_end) & (tt <= plateau_end)
    in_fall = (tt > plateau_end) & (tt <= end)

    # Empty branches (zero rise or fall) never select.
    safe_a = a if a > 0 else 1.0
    safe_b = b if b > 0 else 1.0
    rise = 0.5 * mag * (1.0 - np.cos(math.pi * (tt - o) / safe_a))
    fall = 0.5 * mag * (1.0 - np.cos(math.pi * (b - (tt - plateau_end)) / safe_b))

    value = np.select([in_rise, in_plateau, in_fall], [rise, np.full_like(tt, mag), fall], default=0.0)
    return float(value) if np.ndim(t) == 0 else value


def line_spectrum(peaks: tuple[PseudoVoigtPeak, ...] | list[PseudoVoigtPeak], g: FrequencyGrid) -> np.ndarray:
    """Sums the line shapes of ``peaks`` over the frequency grid."""
    axis = g.axis
    total = np.zeros(g.m)
    for peak in peaks:
        total += eval_pseudo_voigt(axis, peak)
    return total


def window_profile(w: ElutionWindow, g: TimeGrid) -> np.ndarray:
    return np.asarray(eval_elution_window(g.axis, w), dtype=float)
