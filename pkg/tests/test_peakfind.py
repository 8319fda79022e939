import numpy as np
import pytest

from specdetect.exceptions import DataError
from specdetect.model.forward import synthesize
from specdetect.model.lineshapes import eval_pseudo_voigt
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
from specdetect.peakfind import DEFAULT_SCALES, find_peaks_1d_cwt, find_peaks_2d, noise_level, prominence_percentiles


def _one_peak_analytes():
    return [
        AnalyteSpec(name="a", peaks=(PseudoVoigtPeak(center=520.0, amplitude=3.0, sigma2=16.0),),
                    window=ElutionWindow(origin=1.0, duration=1.0, rise=1.0, fall=1.0), quantity=100.0),
        AnalyteSpec(name="b", peaks=(PseudoVoigtPeak(center=700.0, amplitude=3.0, sigma2=16.0),),
                    window=ElutionWindow(origin=6.0, duration=1.0, rise=1.0, fall=1.0), quantity=100.0),
    ]


def test_two_separated_lines_are_found_at_their_centres():
    x = np.arange(300, dtype=float)
    width = PseudoVoigtPeak(center=0.0, amplitude=1.0, sigma2=4.0).gamma
    signal_in = (
        eval_pseudo_voigt(x, PseudoVoigtPeak(center=100.0, amplitude=50.0, sigma2=4.0))
        + eval_pseudo_voigt(x, PseudoVoigtPeak(center=100.0 + 20 * width, amplitude=40.0, sigma2=4.0))
    )
    found = find_peaks_1d_cwt(signal_in, [1.0, 2.0, 4.0, 8.0], min_snr=1.0)
    centres = [i for i, _ in found]
    assert len(centres) == 2
    assert abs(centres[0] - 100) <= 1
    assert abs(centres[1] - (100 + 20 * width)) <= 1
    assert all(p > 0 for _, p in found)


def test_flat_or_short_signals_have_no_peaks():
    assert find_peaks_1d_cwt(np.ones(50), [1.0, 2.0], 1.0) == []
    assert find_peaks_1d_cwt(np.array([0.0, 1.0]), [1.0], 1.0) == []
    with pytest.raises(DataError):
        find_peaks_1d_cwt(np.arange(10.0), [], 1.0)


def test_two_analytes_give_two_ordered_candidates(small_grids):
    gt, gf = small_grids
    y = synthesize(_one_peak_analytes(), SolventSpec.absent(gt, gf), NoiseConfig.off(), gt, gf, seed=0)
    cands = find_peaks_2d(y, gamma=1.0)
    assert len(cands) == 2
    first, second = cands
    assert (first.t_index, first.f_index) < (second.t_index, second.f_index)
    assert abs(first.f_index - gf.index_of(520.0)) <= 1
    assert abs(second.f_index - gf.index_of(700.0)) <= 1
    # Window centres at 2.5 s and 7.5 s.
    assert abs(first.t_index - gt.index_of(2.5)) <= 1
    assert abs(second.t_index - gt.index_of(7.5)) <= 1
    assert first.t_start <= first.t_index <= first.t_stop


def test_gamma_filters_monotonically(small_grids):
    gt, gf = small_grids
    y = synthesize(_one_peak_analytes(), SolventSpec.absent(gt, gf), NoiseConfig(gaussian_sigma=0.3), gt, gf,
                   seed=4, clamp=False)
    previous = None
    for gamma in (0.0, 1.0, 5.0, 20.0, 1e9):
        keys = {(c.t_index, c.f_index) for c in find_peaks_2d(y, gamma)}
        if previous is not None:
            assert keys <= previous
        previous = keys
    assert previous == set()


def test_gamma_above_maximum_gives_nothing(small_grids):
    gt, gf = small_grids
    y = synthesize(_one_peak_analytes(), SolventSpec.absent(gt, gf), NoiseConfig.off(), gt, gf, seed=0)
    assert find_peaks_2d(y, gamma=float(y.values.max()) * 1.01) == []
    with pytest.raises(DataError):
        find_peaks_2d(y, gamma=-1.0)


def test_single_row_blips_are_not_candidates():
    gt = TimeGrid(delta_t=0.2, n=20)
    gf = FrequencyGrid(f_min=0.0, delta_f=1.0, m=100)
    values = np.zeros((20, 100))
    values[10] = eval_pseudo_voigt(np.arange(100.0), PseudoVoigtPeak(center=50.0, amplitude=100.0, sigma2=4.0))
    y = MeasurementMatrix(grid_t=gt, grid_f=gf, values=values)
    assert find_peaks_2d(y, gamma=0.0) == []
    assert len(find_peaks_2d(y, gamma=0.0, min_rows=1)) == 1


def test_noise_level_estimates_gaussian_sigma(rng):
    values = rng.normal(0.0, 2.0, size=(400, 300))
    assert noise_level(values) == pytest.approx(2.0, rel=0.05)
    assert noise_level(values[:1]) == 0.0


def test_prominence_percentiles_nearest_rank():
    cands = [PeakCandidate(t_index=i, f_index=i, intensity=1.0, prominence=float(i)) for i in range(1, 11)]
    np.testing.assert_array_equal(prominence_percentiles(cands, [50, 30]), [5.0, 3.0])
    with pytest.raises(DataError):
        prominence_percentiles([], [50])
    with pytest.raises(DataError):
        prominence_percentiles(cands, [101])


def test_plateau_rows_keep_a_single_track(small_grids):
    gt, gf = small_grids
    analyte = _one_peak_analytes()[0]
    y = synthesize([analyte], SolventSpec.absent(gt, gf), NoiseConfig.off(), gt, gf, seed=0)
    centre = gf.index_of(520.0)
    for row in range(gt.index_of(2.0), gt.index_of(3.0) + 1):
        assert [i for i, _ in find_peaks_1d_cwt(y.values[row], DEFAULT_SCALES, 1.0)] == [centre]

    cands = find_peaks_2d(y, gamma=0.0)
    assert len(cands) == 1
    (cand,) = cands
    assert cand.f_index == centre
    assert cand.t_start <= gt.index_of(2.0) and cand.t_stop >= gt.index_of(3.0)
    assert abs(cand.t_index - gt.index_of(2.5)) <= 1
    assert cand.intensity == pytest.approx(float(y.values[:, centre].max()))


@pytest.mark.parametrize("shift", [3, 10, 25])
def test_candidates_follow_a_frequency_shift(small_grids, shift):
    gt, gf = small_grids

    def moved(analytes, bins):
        return [
            AnalyteSpec(name=a.name, window=a.window, quantity=a.quantity,
                        peaks=tuple(PseudoVoigtPeak(center=p.center + bins * gf.delta_f, amplitude=p.amplitude,
                                                    sigma2=p.sigma2, nu=p.nu) for p in a.peaks))
            for a in analytes
        ]

    base = synthesize(_one_peak_analytes(), SolventSpec.absent(gt, gf), NoiseConfig.off(), gt, gf, seed=0)
    shifted = synthesize(moved(_one_peak_analytes(), shift), SolventSpec.absent(gt, gf), NoiseConfig.off(), gt, gf,
                         seed=0)
    before = find_peaks_2d(base, gamma=1.0)
    after = find_peaks_2d(shifted, gamma=1.0)
    assert len(before) == len(after) == 2
    assert [c.f_index + shift for c in before] == [c.f_index for c in after]
    assert all(abs(b.t_index - a.t_index) <= 1 for b, a in zip(before, after))
