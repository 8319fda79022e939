"""Forward synthesis of time-resolved spectra with known ground truth.

    Y[t, f] = sum_k lambda_k[t] * (X_k[f] + X_FL,k[f]) + lambda_0[t] * S[f]
              + N[t, f] + Z_SN[t, f] + Z_CN[t, f]

with lambda_k = q_k * G(t; window_k) and X_k a sum of pseudo-Voigt lines.
Every stochastic term draws from its own named sub-stream of the seed.
"""

from __future__ import annotations

import itertools
import logging
from collections.abc import Sequence

import numpy as np

from specdetect.exceptions import DataError, DimensionError
from specdetect.model.lineshapes import line_spectrum, window_profile
from specdetect.model.noise import fluorescence_background, sample_cosmic_noise, sample_shot_noise
from specdetect.model.types import (
    AnalyteSpec,
    FrequencyGrid,
    GroundTruth,
    MeasurementMatrix,
    NoiseConfig,
    SolventSpec,
    TimeGrid,
)
from specdetect.runtime import substream

logger = logging.getLogger(__name__)


def analyte_spectrum(a: AnalyteSpec, g: FrequencyGrid) -> np.ndarray:
    """X_k[f]: the analyte's lines summed over the frequency grid."""
    return line_spectrum(a.peaks, g)


def analyte_elution(a: AnalyteSpec, g: TimeGrid) -> np.ndarray:
    """lambda_k[t] = q_k * G(t; window_k)."""
    return a.quantity * window_profile(a.window, g)


def elution_matrix(analytes: Sequence[AnalyteSpec], g: TimeGrid) -> np.ndarray:
    """Ground-truth Lambda (N x K)."""
    if not analytes:
        return np.zeros((g.n, 0))
    return np.column_stack([analyte_elution(a, g) for a in analytes])


def spectrum_matrix(analytes: Sequence[AnalyteSpec], g: FrequencyGrid) -> np.ndarray:
    """Ground-truth X (M x K)."""
    if not analytes:
        return np.zeros((g.m, 0))
    return np.column_stack([analyte_spectrum(a, g) for a in analytes])


def analyte_matrix(analytes: Sequence[AnalyteSpec], gt: TimeGrid, gf: FrequencyGrid) -> np.ndarray:
    """Noiseless analyte-only term Lambda X^T."""
    return elution_matrix(analytes, gt) @ spectrum_matrix(analytes, gf).T


def check_elution_overlap(analytes: Sequence[AnalyteSpec]) -> list[tuple[str, str]]:
    """Returns the name pairs whose elution windows superpose."""
    return [
        (a.name, b.name)
        for a, b in itertools.combinations(analytes, 2)
        if a.window.overlaps(b.window)
    ]


def _fluorescence_terms(
    analytes: Sequence[AnalyteSpec], noise: NoiseConfig, gf: FrequencyGrid, seed: int
) -> list[np.ndarray]:
    degree = noise.fluorescence_degree
    if noise.fluorescence_coeffs is not None:
        if len(noise.fluorescence_coeffs) != len(analytes):
            raise DataError(
                f"{len(noise.fluorescence_coeffs)} fluorescence coefficient lists for {len(analytes)} analytes"
            )
        return [fluorescence_background(degree, c, gf) for c in noise.fluorescence_coeffs]
    rng = substream(seed, "noise.fluorescence")
    return [
        fluorescence_background(degree, rng.uniform(0.0, noise.fluorescence_scale, degree + 1), gf)
        for _ in analytes
    ]


def synthesize(
    analytes: Sequence[AnalyteSpec],
    solvent: SolventSpec,
    noise: NoiseConfig,
    gt: TimeGrid,
    gf: FrequencyGrid,
    seed: int,
    clamp: bool = True,
    config_hash: str = "",
) -> MeasurementMatrix:
    """Synthesizes a measurement matrix and keeps its ground truth alongside.

    Args:
        analytes: Analytes present in the sample (may be empty).
        solvent: Solvent spectrum and elution pattern.
        noise: Stochastic terms to include.
        gt: Time grid.
        gf: Frequency grid.
        seed: Master seed; identical seeds give bit-identical matrices.
        clamp: Clip the final matrix at zero. Disable for model-exact output.
        config_hash: Provenance digest stored in the ground truth.

    Raises:
        DimensionError: If the solvent vectors do not match the grids.
    """
    if solvent.spectrum.shape != (gf.m,) or solvent.elution.shape != (gt.n,):
        raise DimensionError(
            f"solvent vectors {solvent.spectrum.shape}/{solvent.elution.shape} do not match grids ({gf.m},)/({gt.n},)"
        )
    analytes = tuple(analytes)
    for name_a, name_b in check_elution_overlap(analytes):
        logger.warning("elution windows of %s and %s superpose", name_a, name_b)

    lam = elution_matrix(analytes, gt)
    clean_analytes = lam @ spectrum_matrix(analytes, gf).T
    values = clean_analytes + np.outer(solvent.elution, solvent.spectrum)

    if noise.fluorescence_enabled and analytes:
        for k, background in enumerate(_fluorescence_terms(analytes, noise, gf, seed)):
            values += np.outer(lam[:, k], background)

    if noise.shot_enabled:
        rates = np.clip(values, 0.0, None)
        values = values + (sample_shot_noise(rates, substream(seed, "noise.shot")) - rates)
    if noise.gaussian_sigma > 0:
        values = values + substream(seed, "noise.gaussian").normal(0.0, noise.gaussian_sigma, values.shape)
    if noise.cosmic_rate > 0 and noise.cosmic_amplitude > 0:
        values = values + sample_cosmic_noise(
            gt, gf, noise.cosmic_amplitude, noise.cosmic_rate, substream(seed, "noise.cosmic")
        )
    if clamp:
        values = np.clip(values, 0.0, None)

    truth = GroundTruth(
        analytes=analytes,
        solvent=solvent,
        noise=noise,
        seed=int(seed),
        analyte_matrix=clean_analytes,
        config_hash=config_hash,
    )
    logger.debug("synthesized %s matrix with %d analytes (seed=%d)", values.shape, len(analytes), seed)
    return MeasurementMatrix(grid_t=gt, grid_f=gf, values=values, truth=truth)
