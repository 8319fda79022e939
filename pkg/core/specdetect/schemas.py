"""Validated JSON documents: experiment descriptions and pipeline settings.

The documents mirror the domain types field for field and convert to them
with ``to_domain``. Validation errors surface as pydantic ``ValidationError``;
``load_experiment`` and ``load_pipeline_config`` re-raise them as
``ConfigError`` so the CLI can map them to a usage exit code.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from specdetect.config import Config
from specdetect.exceptions import ConfigError
from specdetect.model.forward import synthesize as synthesize_matrix
from specdetect.model.lineshapes import line_spectrum
from specdetect.model.types import (
    AnalyteSpec,
    ElutionWindow,
    FrequencyGrid,
    MeasurementMatrix,
    NoiseConfig,
    PseudoVoigtPeak,
    SolventSpec,
    TimeGrid,
)


class _Doc(BaseModel):
    model_config = ConfigDict(extra="forbid")


class TimeGridConfig(_Doc):
    delta_t: float = Field(default=Config.DELTA_T, gt=0)
    n: int = Field(default=Config.N, ge=1)

    def to_domain(self) -> TimeGrid:
        return TimeGrid(delta_t=self.delta_t, n=self.n)


class FrequencyGridConfig(_Doc):
    f_min: float = Config.F_MIN
    delta_f: float = Field(default=Config.DELTA_F, gt=0)
    m: int = Field(default=Config.M, ge=1)

    def to_domain(self) -> FrequencyGrid:
        return FrequencyGrid(f_min=self.f_min, delta_f=self.delta_f, m=self.m)


class PeakConfig(_Doc):
    center: float
    amplitude: float = Field(gt=0)
    sigma2: float = Field(gt=0)
    nu: float = Field(default=0.5, ge=0, le=1)

    def to_domain(self) -> PseudoVoigtPeak:
        return PseudoVoigtPeak(center=self.center, amplitude=self.amplitude, sigma2=self.sigma2, nu=self.nu)


class WindowConfig(_Doc):
    origin: float = Field(ge=0)
    duration: float = Field(ge=0)
    rise: float = Field(ge=0)
    fall: float = Field(ge=0)
    magnitude: float = Field(default=1.0, gt=0)

    def to_domain(self) -> ElutionWindow:
        return ElutionWindow(
            origin=self.origin, duration=self.duration, rise=self.rise, fall=self.fall, magnitude=self.magnitude
        )


class AnalyteConfig(_Doc):
    name: str
    quantity: float = Field(gt=0)
    window: WindowConfig
    peaks: list[PeakConfig] = Field(min_length=1)

    def to_domain(self) -> AnalyteSpec:
        return AnalyteSpec(
            name=self.name,
            peaks=tuple(p.to_domain() for p in self.peaks),
            window=self.window.to_domain(),
            quantity=self.quantity,
        )


class SolventConfig(_Doc):
    """Solvent given explicitly (``spectrum``/``elution`` vectors) or generated.

    ``peaks`` builds S[f] from pseudo-Voigt lines; ``level`` gives a constant
    elution pattern when no vector is supplied.
    """
    spectrum: list[float] | None = None
    peaks: list[PeakConfig] | None = None
    elution: list[float] | None = None
    level: float = Field(default=1.0, ge=0)

    @model_validator(mode="after")
    def _one_spectrum_source(self) -> SolventConfig:
        if self.spectrum is not None and self.peaks is not None:
            raise ValueError("give either 'spectrum' or 'peaks' for the solvent, not both")
        return self

    def to_domain(self, gt: TimeGrid, gf: FrequencyGrid) -> SolventSpec:
        if self.spectrum is not None:
            spectrum = np.asarray(self.spectrum, dtype=float)
        elif self.peaks:
            spectrum = line_spectrum([p.to_domain() for p in self.peaks], gf)
        else:
            spectrum = np.zeros(gf.m)
        elution = np.asarray(self.elution, dtype=float) if self.elution is not None else np.full(gt.n, self.level)
        return SolventSpec(spectrum=spectrum, elution=elution)


class NoiseConfigModel(_Doc):
    gaussian_sigma: float = Field(default=1.0, ge=0)
    shot_enabled: bool = False
    cosmic_amplitude: float = Field(default=0.0, ge=0)
    cosmic_rate: float = Field(default=0.0, ge=0)
    fluorescence_degree: int = Field(default=0, ge=0, le=5)
    fluorescence_coeffs: list[list[float]] | None = None
    fluorescence_scale: float = Field(default=0.0, ge=0)

    def to_domain(self) -> NoiseConfig:
        coeffs = None
        if self.fluorescence_coeffs is not None:
            coeffs = tuple(tuple(row) for row in self.fluorescence_coeffs)
        return NoiseConfig(
            gaussian_sigma=self.gaussian_sigma,
            shot_enabled=self.shot_enabled,
            cosmic_amplitude=self.cosmic_amplitude,
            cosmic_rate=self.cosmic_rate,
            fluorescence_degree=self.fluorescence_degree,
            fluorescence_coeffs=coeffs,
            fluorescence_scale=self.fluorescence_scale,
        )


class ExperimentConfig(_Doc):
    """A complete synthetic experiment."""
    time_grid: TimeGridConfig = Field(default_factory=TimeGridConfig)
    frequency_grid: FrequencyGridConfig = Field(default_factory=FrequencyGridConfig)
    analytes: list[AnalyteConfig] = Field(default_factory=list)
    solvent: SolventConfig | None = None
    noise: NoiseConfigModel = Field(default_factory=NoiseConfigModel)
    clamp: bool = True
    seed: int = 0

    def grids(self) -> tuple[TimeGrid, FrequencyGrid]:
        return self.time_grid.to_domain(), self.frequency_grid.to_domain()

    def analyte_specs(self) -> list[AnalyteSpec]:
        return [a.to_domain() for a in self.analytes]

    def solvent_spec(self) -> SolventSpec:
        gt, gf = self.grids()
        if self.solvent is None:
            return SolventSpec.absent(gt, gf)
        return self.solvent.to_domain(gt, gf)

    def synthesize(self, seed: int | None = None) -> MeasurementMatrix:
        """Synthesizes this experiment; ``seed`` overrides the document's seed."""
        gt, gf = self.grids()
        return synthesize_matrix(
            self.analyte_specs(),
            self.solvent_spec(),
            self.noise.to_domain(),
            gt,
            gf,
            self.seed if seed is None else seed,
            clamp=self.clamp,
            config_hash=self.config_hash(),
        )

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON form (seed excluded)."""
        doc = self.model_dump(mode="json", exclude={"seed"})
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode("utf-8")).hexdigest()


class PipelineConfig(_Doc):
    """Settings of the label-free detection pipeline.

    Defaults follow the processing used for the amino-acid recordings:
    Savitzky-Golay order 3 over 9 bins, wavelet peak picking, k-means over the
    fitted (origin, duration) pairs.
    """
    gamma: float = Field(default=3.0, ge=0)
    sg_window: int = Field(default=9, ge=1)
    sg_order: int = Field(default=3, ge=0)
    smooth_axis: Literal["frequency", "both"] = "frequency"
    fluorescence_degree: int | None = Field(default=3, ge=0)
    despike: bool = False
    despike_z: float = Field(default=8.0, gt=0)
    scales: list[float] = Field(default_factory=lambda: [1.0, 2.0, 4.0, 8.0, 16.0], min_length=1)
    min_snr: float = Field(default=1.0, ge=0)
    merge_bins: int = Field(default=2, ge=0)
    min_rows: int = Field(default=2, ge=1)
    link_snr: float = Field(default=3.0, ge=0)
    half_f: int = Field(default=15, ge=1)
    pad_t: int = Field(default=10, ge=0)
    max_iter: int = Field(default=500, ge=1)
    reject_ratio: float = Field(default=0.9, gt=0)
    k_max: int = Field(default=10, ge=1)
    standardize: bool = False
    restarts: int = Field(default=20, ge=1)
    silhouette_min: float = 0.5
    # Fitted (origin, duration) pairs closer than this many time samples count as one group.
    cluster_tol: float = Field(default=2.0, ge=0)
    # PCA baseline: components to keep (None: true analyte count, plus one when a solvent is present).
    pca_k: int | None = Field(default=None, ge=1)
    pca_center: bool = False
    seed: int = 0

    @model_validator(mode="after")
    def _check_smoothing(self) -> PipelineConfig:
        if self.sg_window % 2 == 0:
            raise ValueError(f"sg_window must be odd, got {self.sg_window}")
        if self.sg_window > 1 and self.sg_order >= self.sg_window:
            raise ValueError(f"sg_order ({self.sg_order}) must be below sg_window ({self.sg_window})")
        if any(s <= 0 for s in self.scales):
            raise ValueError("wavelet scales must be positive")
        return self

    def with_overrides(self, **overrides: Any) -> PipelineConfig:
        """Returns a copy with the non-None overrides applied (flags win over files)."""
        data = self.model_dump()
        data.update({k: v for k, v in overrides.items() if v is not None})
        try:
            return PipelineConfig.model_validate(data)
        except ValidationError as exc:
            raise ConfigError(f"invalid pipeline setting: {exc}") from exc


def _read_json(path: str | Path) -> Any:
    try:
        with Path(path).open("r", encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc


def load_experiment(path: str | Path) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(_read_json(path))
    except ValidationError as exc:
        raise ConfigError(f"invalid experiment config {path}: {exc}") from exc


def load_pipeline_config(path: str | Path | None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    try:
        return PipelineConfig.model_validate(_read_json(path))
    except ValidationError as exc:
        raise ConfigError(f"invalid pipeline config {path}: {exc}") from exc
