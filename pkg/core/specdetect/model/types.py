"""Domain types shared by every stage of the detector.

Grids, line shapes and elution windows describe the forward model; the
remaining types carry the intermediate and final products of the detection
pipeline and of the PCA baseline. All of them are immutable; array fields are
treated as read-only by convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from specdetect.exceptions import DataError, DimensionError

LN2 = math.log(2.0)


@dataclass(frozen=True)
class FrequencyGrid:
    """Wavenumber axis of a measurement: bin i sits at f_min + i * delta_f."""
    f_min: float
    delta_f: float
    m: int

    def __post_init__(self) -> None:
        if not self.delta_f > 0:
            raise DataError(f"delta_f must be positive, got {self.delta_f}")
        if self.m < 1:
            raise DataError(f"m must be at least 1, got {self.m}")

    @property
    def f_max(self) -> float:
        return self.f_min + self.m * self.delta_f

    @property
    def axis(self) -> np.ndarray:
        return self.f_min + self.delta_f * np.arange(self.m, dtype=float)

    def frequency(self, index: float) -> float:
        return self.f_min + index * self.delta_f

    def index_of(self, f: float) -> int:
        """Returns the bin whose centre is nearest to ``f`` (clipped to the grid)."""
        i = int(round((f - self.f_min) / self.delta_f))
        return min(max(i, 0), self.m - 1)


@dataclass(frozen=True)
class TimeGrid:
    """Time axis of a measurement: sample j is taken at j * delta_t."""
    delta_t: float
    n: int

    def __post_init__(self) -> None:
        if not self.delta_t > 0:
            raise DataError(f"delta_t must be positive, got {self.delta_t}")
        if self.n < 1:
            raise DataError(f"n must be at least 1, got {self.n}")

    @property
    def duration(self) -> float:
        return self.n * self.delta_t

    @property
    def axis(self) -> np.ndarray:
        return self.delta_t * np.arange(self.n, dtype=float)

    def index_of(self, t: float) -> int:
        j = int(round(t / self.delta_t))
        return min(max(j, 0), self.n - 1)


@dataclass(frozen=True)
class PseudoVoigtPeak:
    """One spectral line: area ``amplitude``, Gaussian variance ``sigma2``, Gaussian fraction ``nu``."""
    center: float
    amplitude: float
    sigma2: float
    nu: float = 0.5

    def __post_init__(self) -> None:
        if not self.amplitude > 0:
            raise DataError(f"peak amplitude must be positive, got {self.amplitude}")
        if not self.sigma2 > 0:
            raise DataError(f"peak sigma2 must be positive, got {self.sigma2}")
        if not 0.0 <= self.nu <= 1.0:
            raise DataError(f"peak nu must lie in [0, 1], got {self.nu}")

    @property
    def gamma(self) -> float:
        """Lorentzian half-width, tied to the Gaussian variance."""
        return math.sqrt(2.0 * LN2 * self.sigma2)


@dataclass(frozen=True)
class ElutionWindow:
    """Trigonometric rise, plateau and fall of an eluting compound (times in seconds)."""
    origin: float
    duration: float
    rise: float
    fall: float
    magnitude: float = 1.0

    def __post_init__(self) -> None:
        for name in ("origin", "duration", "rise", "fall"):
            if getattr(self, name) < 0:
                raise DataError(f"elution window {name} must be >= 0, got {getattr(self, name)}")
        if not self.magnitude > 0:
            raise DataError(f"elution window magnitude must be positive, got {self.magnitude}")

    @property
    def end(self) -> float:
        return self.origin + self.rise + self.duration + self.fall

    def overlaps(self, other: ElutionWindow) -> bool:
        return self.origin < other.end and other.origin < self.end


@dataclass(frozen=True)
class AnalyteSpec:
    """Ground-truth analyte: its spectral lines, elution window and quantity."""
    name: str
    peaks: tuple[PseudoVoigtPeak, ...]
    window: ElutionWindow
    quantity: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "peaks", tuple(self.peaks))
        if not self.peaks:
            raise DataError(f"analyte {self.name!r} needs at least one peak")
        if not self.quantity > 0:
            raise DataError(f"analyte {self.name!r} quantity must be positive, got {self.quantity}")

    def with_quantity(self, quantity: float) -> AnalyteSpec:
        return replace(self, quantity=quantity)


@dataclass(frozen=True, eq=False)
class SolventSpec:
    """Solvent spectrum S[f] (length M) and its elution pattern (length N)."""
    spectrum: np.ndarray
    elution: np.ndarray

    def __post_init__(self) -> None:
        spectrum = np.asarray(self.spectrum, dtype=float)
        elution = np.asarray(self.elution, dtype=float)
        if spectrum.ndim != 1 or elution.ndim != 1:
            raise DimensionError("solvent spectrum and elution must be vectors")
        if np.any(spectrum < 0) or np.any(elution < 0):
            raise DataError("solvent spectrum and elution must be nonnegative")
        object.__setattr__(self, "spectrum", spectrum)
        object.__setattr__(self, "elution", elution)

    @classmethod
    def absent(cls, gt: TimeGrid, gf: FrequencyGrid) -> SolventSpec:
        return cls(spectrum=np.zeros(gf.m), elution=np.zeros(gt.n))


@dataclass(frozen=True)
class NoiseConfig:
    """Switches and levels of the stochastic terms of the measurement model."""
    gaussian_sigma: float = 1.0
    shot_enabled: bool = False
    cosmic_amplitude: float = 0.0
    cosmic_rate: float = 0.0
    fluorescence_degree: int = 0
    fluorescence_coeffs: tuple[tuple[float, ...], ...] | None = None
    # Upper bound of randomly drawn coefficients when none are given; 0 disables.
    fluorescence_scale: float = 0.0

    def __post_init__(self) -> None:
        if self.gaussian_sigma < 0:
            raise DataError(f"gaussian_sigma must be >= 0, got {self.gaussian_sigma}")
        if self.cosmic_rate < 0 or self.cosmic_amplitude < 0:
            raise DataError("cosmic amplitude and rate must be >= 0")
        if not 0 <= self.fluorescence_degree <= 5:
            raise DataError(f"fluorescence_degree must lie in [0, 5], got {self.fluorescence_degree}")
        if self.fluorescence_coeffs is not None:
            coeffs = tuple(tuple(float(c) for c in row) for row in self.fluorescence_coeffs)
            for row in coeffs:
                if len(row) != self.fluorescence_degree + 1:
                    raise DataError(
                        f"fluorescence coefficient list {row} does not match degree {self.fluorescence_degree}"
                    )
            object.__setattr__(self, "fluorescence_coeffs", coeffs)

    @classmethod
    def off(cls) -> NoiseConfig:
        """Noise-free configuration (model-exact synthesis)."""
        return cls(gaussian_sigma=0.0)

    @property
    def fluorescence_enabled(self) -> bool:
        return self.fluorescence_coeffs is not None or self.fluorescence_scale > 0


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """Everything a synthesized matrix was built from."""
    analytes: tuple[AnalyteSpec, ...]
    solvent: SolventSpec
    noise: NoiseConfig
    seed: int
    analyte_matrix: np.ndarray  # noiseless sum of outer(lambda_k, X_k)
    config_hash: str = ""


@dataclass(frozen=True, eq=False)
class MeasurementMatrix:
    """N x M intensity matrix Y[t, f] on its time and frequency grids."""
    grid_t: TimeGrid
    grid_f: FrequencyGrid
    values: np.ndarray
    truth: GroundTruth | None = None

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid_t.n, self.grid_f.m):
            raise DimensionError(
                f"matrix shape {values.shape} does not match grids ({self.grid_t.n}, {self.grid_f.m})"
            )
        object.__setattr__(self, "values", values)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape  # type: ignore[return-value]

    def with_values(self, values: np.ndarray) -> MeasurementMatrix:
        return replace(self, values=np.asarray(values, dtype=float))


@dataclass(frozen=True)
class BaselineFit:
    """Polynomial baseline over the frequency axis normalised to [0, 1]."""
    coeffs: tuple[float, ...]
    degree: int
    loss: float
    converged: bool = True
    iterations: int = 0


@dataclass(frozen=True)
class PeakCandidate:
    """A 2-D peak: a spectral maximum that persists over consecutive time rows."""
    t_index: int
    f_index: int
    intensity: float
    prominence: float
    t_start: int = -1
    t_stop: int = -1

    def __post_init__(self) -> None:
        if self.t_start < 0:
            object.__setattr__(self, "t_start", self.t_index)
        if self.t_stop < 0:
            object.__setattr__(self, "t_stop", self.t_index)


@dataclass(frozen=True)
class PeakFit:
    """Parameters of the separable window x line-shape model fitted to one candidate."""
    candidate: PeakCandidate
    a_hat: float
    gamma_hat: float
    c_hat: float
    nu_hat: float
    o_hat: float
    d_hat: float
    alpha_hat: float
    beta_hat: float
    mag_hat: float
    rss: float
    converged: bool
    sigma2_hat: float = 0.0
    iterations: int = 0
    patch_energy: float = 0.0
    trace: tuple[float, ...] = field(default=(), repr=False)

    def as_peak(self) -> PseudoVoigtPeak:
        """Unit-area line shape with the fitted centre, width and mixing."""
        return PseudoVoigtPeak(center=self.c_hat, amplitude=1.0, sigma2=self.sigma2_hat, nu=self.nu_hat)

    def as_window(self) -> ElutionWindow:
        return ElutionWindow(
            origin=max(self.o_hat, 0.0),
            duration=self.d_hat,
            rise=self.alpha_hat,
            fall=self.beta_hat,
            magnitude=1.0,
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "t_index": self.candidate.t_index,
            "f_index": self.candidate.f_index,
            "intensity": self.candidate.intensity,
            "prominence": self.candidate.prominence,
            "a_hat": self.a_hat,
            "gamma_hat": self.gamma_hat,
            "sigma2_hat": self.sigma2_hat,
            "c_hat": self.c_hat,
            "nu_hat": self.nu_hat,
            "o_hat": self.o_hat,
            "d_hat": self.d_hat,
            "alpha_hat": self.alpha_hat,
            "beta_hat": self.beta_hat,
            "mag_hat": self.mag_hat,
            "rss": self.rss,
            "iterations": self.iterations,
            "converged": self.converged,
        }


@dataclass(frozen=True, eq=False)
class ClusterModel:
    """Result of k-means over the fitted (origin, duration) pairs."""
    k_hat: int
    centroids: np.ndarray  # k x 2
    assignments: np.ndarray  # peak index -> cluster index
    inertia: float
    trace: tuple[float, ...] = ()
    restart: int = 0


@dataclass(frozen=True, eq=False)
class DetectedAnalyte:
    """One recovered analyte: spectrum, elution pattern and the peaks behind them."""
    spectrum_hat: np.ndarray
    elution_hat: np.ndarray
    member_peaks: tuple[PeakFit, ...]
    centroid: tuple[float, float] = (0.0, 0.0)
    rise: float = 0.0
    fall: float = 0.0
    magnitude: float = 0.0


@dataclass(frozen=True, eq=False)
class DetectionResult:
    """Detector output: K-hat analytes with their reconstructed spectra and elutions."""
    k_hat: int
    analytes: tuple[DetectedAnalyte, ...] = ()

    @classmethod
    def empty(cls) -> DetectionResult:
        return cls(k_hat=0, analytes=())

    @property
    def fits(self) -> list[PeakFit]:
        return [fit for analyte in self.analytes for fit in analyte.member_peaks]


@dataclass(frozen=True, eq=False)
class PcaModel:
    """Truncated factorisation Y ~ U V^T; U carries the singular values, V is orthonormal."""
    u: np.ndarray
    v: np.ndarray
    singular_values: np.ndarray
    mean_row: np.ndarray

    @property
    def k(self) -> int:
        return int(self.u.shape[1])

    def reconstruction(self) -> np.ndarray:
        return self.u @ self.v.T + self.mean_row[None, :]


@dataclass(frozen=True, eq=False)
class LodCurve:
    """Mean detection quality per concentration scaling and the resulting LOD."""
    c_direction: np.ndarray
    etas: np.ndarray
    rhos: np.ndarray
    eta_star: float | None
    threshold: float
    rho_stderr: np.ndarray = field(default_factory=lambda: np.zeros(0))
    trials: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    def to_dict(self) -> dict[str, Any]:
        return {
            "c_direction": [float(c) for c in self.c_direction],
            "etas": [float(e) for e in self.etas],
            "rhos": [float(r) for r in self.rhos],
            "rho_stderr": [float(s) for s in self.rho_stderr],
            "trials": [[float(x) for x in row] for row in self.trials],
            "eta_star": "not-found" if self.eta_star is None else float(self.eta_star),
            "threshold": float(self.threshold),
        }
