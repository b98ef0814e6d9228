import json

import numpy as np
import pandas as pd
import pytest

from psdOU.calibration import drift_condition_check, mom_fit
from psdOU.errors import ConfigError, DimensionError
from psdOU.moments import empirical_moments, psd_diagnostics, stationary_moments
from psdOU.serialization import (
    draws_to_frame,
    dumps,
    emit_report,
    frame_to_matrices,
    jumps_to_frame,
    mom_estimate_to_dict,
    moment_report_from_dict,
    moment_report_to_dict,
    path_to_frame,
    process_spec_from_dict,
    process_spec_to_dict,
    read_draws_csv,
    read_json,
    to_plain,
)
from psdOU.simulation import sample_stationary, simulate_path
from psdOU.subordinators import JumpRecord
from psdOU.symcore import SymMat
from psdOU.utils import make_rng


def test_to_plain_handles_numpy_and_complex():
    data = {
        "m": SymMat([[1.0, 2.0], [2.0, 3.0]]),
        "z": 1.5 - 2.0j,
        "n": np.int64(3),
        "b": np.bool_(True),
        "x": np.float64(np.inf),
        1.0: (1, 2),
    }
    plain = to_plain(data)
    assert plain == {
        "m": [[1.0, 2.0], [2.0, 3.0]],
        "z": {"re": 1.5, "im": -2.0},
        "n": 3,
        "b": True,
        "x": None,
        "1.0": [1, 2],
    }
    json.loads(dumps(data))


def test_moment_report_json_layout(gauss_spec):
    report = stationary_moments(gauss_spec, lags=[0.5])
    data = moment_report_to_dict(report)
    assert list(data["autocov"]) == ["0.0", "0.5"]
    assert data["provenance"] == "closed_form"
    assert len(data["var_vec"]) == 4
    back = moment_report_from_dict(json.loads(dumps(data)))
    np.testing.assert_array_equal(back.var_vec, report.var_vec)
    np.testing.assert_array_equal(back.autocov[0.5], report.autocov[0.5])
    assert back.mean == report.mean


def test_monte_carlo_report_keeps_std_errors(gauss_spec):
    draws = sample_stationary(gauss_spec, 20, make_rng(0))
    report = empirical_moments(draws, {0.5: draws[::-1]})
    back = moment_report_from_dict(json.loads(dumps(moment_report_to_dict(report))))
    assert back.n_samples == 20
    np.testing.assert_array_equal(back.std_errors["autocov"][0.5], report.std_errors["autocov"][0.5])


def test_malformed_moment_report():
    with pytest.raises(ConfigError):
        moment_report_from_dict({"mean": [[1.0]]})


def test_mom_estimate_json(gauss_spec):
    est = mom_fit(stationary_moments(gauss_spec, lags=[0.5]))
    condition = drift_condition_check(est.A_hat, est.mean_L)
    data = mom_estimate_to_dict(est, condition)
    assert set(data) == {
        "A_hat", "mean_L", "var_vec_L", "lags", "stable", "residuals", "subordinator_check", "drift_condition",
    }
    assert data["lags"] == [0.5]
    assert data["subordinator_check"]["mean_L_psd"] is True


def test_process_spec_round_trip(gauss_spec):
    back = process_spec_from_dict(json.loads(dumps(process_spec_to_dict(gauss_spec))))
    np.testing.assert_array_equal(back.drift.A, gauss_spec.drift.A)
    assert back.driver.to_dict() == gauss_spec.driver.to_dict()


def test_path_csv_layout(gauss_spec, tmp_path):
    path = simulate_path(gauss_spec, 2.0, make_rng(1))
    target = emit_report(path, tmp_path / "path.csv", fmt="csv")
    header = target.read_text(encoding="utf-8").splitlines()[0]
    assert header == "time,s_11,s_21,s_22"
    frame = pd.read_csv(target, float_precision="round_trip")
    np.testing.assert_array_equal(frame_to_matrices(frame), path.states)
    np.testing.assert_array_equal(frame["time"].to_numpy(), path.times)
    assert path_to_frame(path).shape == (path.times.size, 4)


def test_jump_and_draw_frames(tmp_path):
    jumps = [JumpRecord(0.5, np.array([[1.0, 0.5], [0.5, 2.0]]))]
    frame = jumps_to_frame(jumps, 2)
    assert list(frame.columns) == ["time", "s_11", "s_21", "s_22"]
    assert frame.iloc[0].tolist() == [0.5, 1.0, 0.5, 2.0]
    assert jumps_to_frame([], 3).shape == (0, 7)

    draws = np.array([np.eye(2), 2.0 * np.eye(2)])
    assert list(draws_to_frame(draws).columns) == ["sample", "s_11", "s_21", "s_22"]
    target = emit_report(draws, tmp_path / "draws.csv", fmt="csv")
    np.testing.assert_array_equal(read_draws_csv(target), draws)


def test_csv_is_byte_identical_for_identical_input(gauss_spec, tmp_path):
    a = emit_report(simulate_path(gauss_spec, 3.0, make_rng(4)), tmp_path / "a.csv", fmt="csv")
    b = emit_report(simulate_path(gauss_spec, 3.0, make_rng(4)), tmp_path / "b.csv", fmt="csv")
    assert a.read_bytes() == b.read_bytes()


def test_frame_to_matrices_rejects_bad_columns():
    with pytest.raises(ConfigError):
        frame_to_matrices(pd.DataFrame({"time": [0.0]}))
    with pytest.raises(ConfigError):
        frame_to_matrices(pd.DataFrame({"s_22": [1.0], "s_21": [0.0], "s_11": [1.0]}))
    with pytest.raises(DimensionError):
        draws_to_frame(np.ones((2, 2)))


def test_emit_report_json_and_errors(tmp_path):
    diag = psd_diagnostics(np.array([np.eye(2)]))
    target = emit_report(diag, tmp_path / "nested" / "diag.json")
    assert read_json(target)["n"] == 1
    assert read_json(emit_report({"a": np.arange(2)}, tmp_path / "plain.json")) == {"a": [0, 1]}
    with pytest.raises(ConfigError):
        emit_report({"a": 1}, tmp_path / "x.csv", fmt="csv")
    with pytest.raises(ConfigError):
        emit_report({"a": 1}, tmp_path / "x.xml", fmt="xml")
    with pytest.raises(ConfigError):
        read_json(tmp_path / "missing.json")
