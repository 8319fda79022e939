import numpy as np
import pytest

from specdetect.exceptions import DataError
from specdetect.io import (
    load_measurement,
    read_detection,
    read_matrix,
    read_sidecar,
    sidecar_path,
    write_detection,
    write_fits_csv,
    write_matrix,
    write_sidecar,
)
from specdetect.model.types import DetectedAnalyte, DetectionResult, PeakCandidate, PeakFit


def test_matrix_and_sidecar_survive_a_write_read_cycle(small_experiment, tmp_path):
    y = small_experiment.synthesize()
    path = write_matrix(tmp_path / "run" / "y.csv", y)
    write_sidecar(sidecar_path(path), y)
    assert sidecar_path(path).name == "y.truth.json"

    loaded, side = load_measurement(path)
    np.testing.assert_array_equal(loaded.values, y.values)
    assert loaded.grid_t == y.grid_t
    assert loaded.grid_f == y.grid_f
    assert side is not None and side.solvent is not None
    np.testing.assert_allclose(side.solvent.spectrum, y.truth.solvent.spectrum)
    assert [a.name for a in loaded.truth.analytes] == ["a", "b"]
    assert loaded.truth.seed == small_experiment.seed
    assert loaded.truth.config_hash == small_experiment.config_hash()
    np.testing.assert_allclose(loaded.truth.analyte_matrix, y.truth.analyte_matrix)


def test_matrix_without_sidecar_infers_its_grids(tmp_path, rng):
    from specdetect.model.types import FrequencyGrid, MeasurementMatrix, TimeGrid

    y = MeasurementMatrix(grid_t=TimeGrid(delta_t=0.25, n=8), grid_f=FrequencyGrid(f_min=600.0, delta_f=1.5, m=12),
                          values=rng.uniform(size=(8, 12)))
    path = write_matrix(tmp_path / "y.csv", y)
    loaded, side = load_measurement(path)
    assert side is None and loaded.truth is None
    assert loaded.grid_t.delta_t == pytest.approx(0.25)
    assert loaded.grid_f.f_min == pytest.approx(600.0)
    assert loaded.grid_f.delta_f == pytest.approx(1.5)
    np.testing.assert_array_equal(loaded.values, y.values)


@pytest.mark.parametrize(
    "content",
    [
        "time,400.0,402.0\n0.0,1.0,oops\n0.2,1.0,2.0\n",
        "time,400.0,401.0,405.0\n0.0,1.0,2.0,3.0\n",
        "time,a,b\n0.0,1.0,2.0\n",
        "",
    ],
)
def test_malformed_matrix_csv_raises(tmp_path, content):
    path = tmp_path / "bad.csv"
    path.write_text(content, encoding="utf-8")
    with pytest.raises(DataError):
        read_matrix(path)


def test_missing_files_raise(tmp_path):
    with pytest.raises(DataError):
        read_matrix(tmp_path / "absent.csv")
    with pytest.raises(DataError):
        read_sidecar(tmp_path / "absent.truth.json")


def test_detection_result_round_trip(tmp_path, small_grids):
    gt, gf = small_grids
    cand = PeakCandidate(t_index=12, f_index=50, intensity=30.0, prominence=28.0)
    fit = PeakFit(candidate=cand, a_hat=1.0, gamma_hat=4.7, c_hat=500.2, nu_hat=0.5, o_hat=1.1, d_hat=0.9,
                  alpha_hat=1.0, beta_hat=1.0, mag_hat=300.0, rss=0.5, converged=True, sigma2_hat=16.0,
                  iterations=12)
    analyte = DetectedAnalyte(spectrum_hat=np.linspace(0.0, 1.0, gf.m), elution_hat=np.linspace(1.0, 0.0, gt.n),
                              member_peaks=(fit,), centroid=(1.1, 0.9), rise=1.0, fall=1.0, magnitude=300.0)
    path = write_detection(tmp_path / "detection.json", DetectionResult(k_hat=1, analytes=(analyte,)))

    back = read_detection(path)
    assert back.k_hat == 1
    np.testing.assert_array_equal(back.analytes[0].spectrum_hat, analyte.spectrum_hat)
    np.testing.assert_array_equal(back.analytes[0].elution_hat, analyte.elution_hat)
    assert back.analytes[0].member_peaks == (fit,)
    assert back.analytes[0].centroid == (1.1, 0.9)


def test_malformed_detection_result_raises(tmp_path):
    path = tmp_path / "detection.json"
    path.write_text('{"k_hat": 1}', encoding="utf-8")
    with pytest.raises(DataError):
        read_detection(path)


def test_fits_csv_has_one_row_per_fit(tmp_path):
    cand = PeakCandidate(t_index=1, f_index=2, intensity=3.0, prominence=4.0)
    fit = PeakFit(candidate=cand, a_hat=1.0, gamma_hat=2.0, c_hat=3.0, nu_hat=0.5, o_hat=1.0, d_hat=1.0,
                  alpha_hat=1.0, beta_hat=1.0, mag_hat=2.0, rss=0.0, converged=False)
    path = write_fits_csv(tmp_path / "fits.csv", [fit, fit])
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0].startswith("t_index,f_index,intensity")
    assert len(lines) == 3
