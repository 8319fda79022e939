"""Forward model: domain types, line shapes, noise terms and synthesis."""

from specdetect.model.forward import (
    analyte_elution,
    analyte_matrix,
    analyte_spectrum,
    check_elution_overlap,
    elution_matrix,
    spectrum_matrix,
    synthesize,
)
from specdetect.model.lineshapes import eval_elution_window, eval_pseudo_voigt
from specdetect.model.noise import fluorescence_background, sample_cosmic_noise, sample_shot_noise
from specdetect.model.types import (
    AnalyteSpec,
    BaselineFit,
    ClusterModel,
    DetectedAnalyte,
    DetectionResult,
    ElutionWindow,
    FrequencyGrid,
    GroundTruth,
    LodCurve,
    MeasurementMatrix,
    NoiseConfig,
    PcaModel,
    PeakCandidate,
    PeakFit,
    PseudoVoigtPeak,
    SolventSpec,
    TimeGrid,
)

__all__ = [
    "AnalyteSpec",
    "BaselineFit",
    "ClusterModel",
    "DetectedAnalyte",
    "DetectionResult",
    "ElutionWindow",
    "FrequencyGrid",
    "GroundTruth",
    "LodCurve",
    "MeasurementMatrix",
    "NoiseConfig",
    "PcaModel",
    "PeakCandidate",
    "PeakFit",
    "PseudoVoigtPeak",
    "SolventSpec",
    "TimeGrid",
    "analyte_elution",
    "analyte_matrix",
    "analyte_spectrum",
    "check_elution_overlap",
    "elution_matrix",
    "eval_elution_window",
    "eval_pseudo_voigt",
    "fluorescence_background",
    "sample_cosmic_noise",
    "sample_shot_noise",
    "spectrum_matrix",
    "synthesize",
]
