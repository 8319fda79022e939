import numpy as np
import pytest

from specdetect.exceptions import DataError
from specdetect.model.forward import synthesize
from specdetect.model.lineshapes import eval_pseudo_voigt, window_profile
from specdetect.model.types import (
    AnalyteSpec,
    ElutionWindow,
    FrequencyGrid,
    MeasurementMatrix,
    NoiseConfig,
    PeakCandidate,
    PseudoVoigtPeak,
    SolventSpec,
    TimeGrid,
)
from specdetect.peakfind import find_peaks_2d
from specdetect.peakfit import (
    Patch,
    extract_patch,
    fit_all,
    fit_separable_peak,
    separable_jacobian,
    separable_model,
    theta_from_params,
)
from specdetect import peakfit
from specdetect.schemas import PipelineConfig

GT = TimeGrid(delta_t=0.2, n=50)
GF = FrequencyGrid(f_min=900.0, delta_f=2.0, m=100)
PEAK = PseudoVoigtPeak(center=1001.3, amplitude=2.0, sigma2=20.0, nu=0.4)
WINDOW = ElutionWindow(origin=2.1, duration=1.5, rise=1.0, fall=1.2)
QUANTITY = 50.0


def _single_peak(noise=None, seed=0):
    analyte = AnalyteSpec(name="x", peaks=(PEAK,), window=WINDOW, quantity=QUANTITY)
    return synthesize([analyte], SolventSpec.absent(GT, GF), noise or NoiseConfig.off(), GT, GF, seed=seed,
                      clamp=False)


@pytest.fixture(scope="module")
def candidate():
    cands = find_peaks_2d(_single_peak(), gamma=0.0)
    assert len(cands) == 1
    return cands[0]


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(2024)
    t = GT.axis[:40]
    f = GF.axis
    for _ in range(100):
        theta = theta_from_params(
            mag=rng.uniform(0.5, 5.0),
            sigma2=rng.uniform(4.0, 40.0),
            center=rng.uniform(960.0, 1040.0),
            nu=rng.uniform(0.1, 0.9),
            origin=rng.uniform(0.5, 2.0),
            duration=rng.uniform(0.5, 2.0),
            rise=rng.uniform(0.5, 1.5),
            fall=rng.uniform(0.5, 1.5),
        )
        jac = separable_jacobian(theta, t, f)
        fd = np.empty_like(jac)
        for k in range(theta.size):
            h = 1e-6 * max(1.0, abs(theta[k]))
            up, down = theta.copy(), theta.copy()
            up[k] += h
            down[k] -= h
            fd[:, k] = (separable_model(up, t, f).ravel() - separable_model(down, t, f).ravel()) / (2.0 * h)
        scale = np.maximum(np.abs(jac).max(axis=0), 1e-12)
        assert np.max(np.abs(jac - fd) / scale) < 1e-5


def test_model_is_the_product_of_window_and_line():
    theta = theta_from_params(3.0, PEAK.sigma2, PEAK.center, PEAK.nu, WINDOW.origin, WINDOW.duration,
                              WINDOW.rise, WINDOW.fall)
    surface = separable_model(theta, GT.axis, GF.axis)
    unit = PseudoVoigtPeak(center=PEAK.center, amplitude=1.0, sigma2=PEAK.sigma2, nu=PEAK.nu)
    expected = 3.0 * np.outer(window_profile(WINDOW, GT), eval_pseudo_voigt(GF.axis, unit))
    np.testing.assert_allclose(surface, expected, rtol=1e-12, atol=1e-14)


def test_noiseless_peak_parameters_are_recovered(candidate):
    y = _single_peak()
    fit = fit_separable_peak(extract_patch(y, candidate), candidate)
    assert fit.converged
    assert fit.c_hat == pytest.approx(PEAK.center, rel=1e-2)
    assert fit.sigma2_hat == pytest.approx(PEAK.sigma2, rel=1e-2)
    assert fit.nu_hat == pytest.approx(PEAK.nu, abs=1e-2)
    assert fit.o_hat == pytest.approx(WINDOW.origin, rel=1e-2)
    assert fit.d_hat == pytest.approx(WINDOW.duration, rel=1e-2)
    assert fit.alpha_hat == pytest.approx(WINDOW.rise, rel=1e-2)
    assert fit.beta_hat == pytest.approx(WINDOW.fall, rel=1e-2)
    assert fit.mag_hat == pytest.approx(QUANTITY * PEAK.amplitude, rel=1e-2)
    assert fit.a_hat == 1.0
    assert fit.rss <= 1e-6 * fit.patch_energy


def test_rss_trace_never_increases(candidate):
    y = _single_peak(NoiseConfig(gaussian_sigma=0.5), seed=3)
    fit = fit_separable_peak(extract_patch(y, candidate), candidate)
    trace = np.asarray(fit.trace)
    assert trace.size >= 2
    assert np.all(np.diff(trace) <= 0)
    assert fit.rss == trace[-1]


def test_fit_is_scale_equivariant(candidate):
    y = _single_peak(NoiseConfig(gaussian_sigma=0.5), seed=5)
    base = fit_separable_peak(extract_patch(y, candidate), candidate)
    scaled = fit_separable_peak(extract_patch(y.with_values(7.0 * y.values), candidate), candidate)
    assert scaled.mag_hat == pytest.approx(7.0 * base.mag_hat, rel=1e-6)
    for name in ("c_hat", "sigma2_hat", "o_hat", "d_hat", "alpha_hat", "beta_hat"):
        assert getattr(scaled, name) == pytest.approx(getattr(base, name), rel=1e-6, abs=1e-9)


def test_noisy_fits_stay_within_a_bin(candidate):
    height = QUANTITY * float(eval_pseudo_voigt(PEAK.center, PEAK))
    centre_err, origin_err = [], []
    for seed in range(20):
        y = _single_peak(NoiseConfig(gaussian_sigma=0.01 * height), seed=seed)
        fit = fit_separable_peak(extract_patch(y, candidate), candidate)
        centre_err.append(abs(fit.c_hat - PEAK.center))
        origin_err.append(abs(fit.o_hat - WINDOW.origin))
    assert np.median(centre_err) <= 0.5 * GF.delta_f
    assert np.median(origin_err) <= GT.delta_t


def test_zero_patch_is_reported_not_raised():
    patch = Patch(values=np.zeros((5, 7)), t0=0, f0=0, t_axis=GT.axis[:5], f_axis=GF.axis[:7])
    fit = fit_separable_peak(patch, PeakCandidate(t_index=2, f_index=3, intensity=0.0, prominence=0.0))
    assert not fit.converged
    assert fit.mag_hat == 0.0
    assert fit.rss == 0.0


def test_extract_patch_clips_to_the_matrix():
    y = MeasurementMatrix(grid_t=GT, grid_f=GF, values=np.ones((GT.n, GF.m)))
    cand = PeakCandidate(t_index=1, f_index=98, intensity=1.0, prominence=1.0, t_start=0, t_stop=3)
    patch = extract_patch(y, cand, half_f=5, pad_t=2)
    assert patch.values.shape == (6, 7)
    assert (patch.t0, patch.f0) == (0, 93)
    assert patch.local(cand) == (1, 5)
    with pytest.raises(DataError):
        fit_separable_peak(Patch(values=np.zeros((0, 0)), t0=0, f0=0, t_axis=np.zeros(0), f_axis=np.zeros(0)),
                           cand)


def test_fit_all_rejects_fits_that_do_not_explain_their_patch(candidate):
    y = _single_peak(NoiseConfig(gaussian_sigma=0.5), seed=9)
    assert len(fit_all(y, [candidate], PipelineConfig())) == 1
    assert fit_all(y, [candidate], PipelineConfig(reject_ratio=1e-9)) == []
    assert fit_all(y, [], PipelineConfig()) == []


def test_huge_log_coordinates_do_not_overflow():
    theta = np.array([800.0, 800.0, 1001.0, 0.0, 2.0, 800.0, 800.0, 800.0])
    with np.errstate(all="ignore"):
        surface = separable_model(theta, GT.axis, GF.axis)
    assert surface.shape == (GT.n, GF.m)


def test_solver_overflow_is_reported_not_raised(monkeypatch, candidate):
    def overflow(theta, patch, max_iter):
        raise OverflowError("math range error")

    monkeypatch.setattr(peakfit, "_levenberg_marquardt", overflow)
    y = _single_peak(NoiseConfig(gaussian_sigma=0.5), seed=1)
    fit = fit_separable_peak(extract_patch(y, candidate), candidate)
    assert not fit.converged
    assert np.isfinite(fit.rss)
    assert fit.iterations == 0
    assert len(fit_all(y, [candidate], PipelineConfig(reject_ratio=1e9))) == 1
