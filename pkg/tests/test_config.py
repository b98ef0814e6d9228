import json

import numpy as np
import pytest

from psdOU.config import (
    OUTPUT_DIR_ENV,
    build_driver,
    build_process,
    load_config,
    parse_config,
    with_overrides,
)
from psdOU.errors import ConfigError
from psdOU.subordinators import TypeGbar


def test_defaults_without_model():
    cfg = parse_config({})
    assert cfg.model is None
    assert cfg.run.seed == 0
    assert cfg.output.path_csv == "path.csv"
    assert cfg.tolerances.solve_cond_max == 1e12
    with pytest.raises(ConfigError):
        build_process(cfg)


def test_full_config_builds_process(gauss_config):
    cfg = parse_config(gauss_config)
    spec = build_process(cfg)
    assert spec.dim == 2
    assert spec.options.grid_step == 0.1
    assert cfg.run.lags == [0.5]
    assert isinstance(cfg.run.n_samples, int)


@pytest.mark.parametrize(
    "patch",
    [
        {"unknown": 1},
        {"run": {"horizon": -1.0}},
        {"run": {"n_samples": 0}},
        {"run": {"seed": -3}},
        {"run": {"lags": [-0.5]}},
        {"run": {"grid_step": 0.0}},
        {"run": {"burn_in_tol": 1.5}},
        {"run": {"horizon": "long"}},
        {"run": {"speed": 1.0}},
        {"output": {"folder": "x"}},
        {"tolerances": {"psd_tol": 0.0}},
        {"extra": [1, 2]},
        {"model": {"drift": [[-1.0]]}},
    ],
)
def test_schema_violations(patch):
    with pytest.raises(ConfigError):
        parse_config(patch)


def test_dimension_mismatch_is_a_config_error(gauss_config):
    gauss_config["model"]["drift"] = [[-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]]
    with pytest.raises(ConfigError):
        parse_config(gauss_config)


def test_bad_driver_is_a_config_error(gauss_config):
    gauss_config["model"]["driver"]["C"] = [[1.0, 2.0], [2.0, 1.0]]
    with pytest.raises(ConfigError):
        parse_config(gauss_config)
    gauss_config["model"]["driver"] = {"kind": "levy"}
    with pytest.raises(ConfigError):
        parse_config(gauss_config)


def test_sigma0_must_be_psd(gauss_config):
    gauss_config["model"]["sigma0"] = [[1.0, 0.0], [0.0, -1.0]]
    with pytest.raises(ConfigError):
        parse_config(gauss_config)


def test_type_gbar_inherits_run_n_sub(gauss_config):
    gauss_config["model"]["driver"] = {
        "kind": "type_gbar",
        "C": [[1.0, 0.0], [0.0, 1.0]],
        "mixing": {"kind": "inverse_gaussian", "delta": 1.0, "alpha": 1.0},
    }
    gauss_config["run"]["n_sub"] = 4
    driver = build_driver(parse_config(gauss_config))
    assert isinstance(driver, TypeGbar)
    assert driver.n_sub == 4


def test_environment_overrides_out_dir(monkeypatch, tmp_path):
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path))
    cfg = parse_config({"output": {"out_dir": "elsewhere"}})
    assert cfg.output.out_dir == str(tmp_path)
    assert cfg.output.path("a.csv") == tmp_path / "a.csv"


def test_absolute_output_names_are_kept(tmp_path):
    cfg = parse_config({"output": {"out_dir": "rel", "report_json": str(tmp_path / "r.json")}})
    assert cfg.output.path(cfg.output.report_json) == tmp_path / "r.json"


def test_overrides():
    cfg = with_overrides(parse_config({}), seed=42, out_dir="results")
    assert cfg.run.seed == 42
    assert cfg.output.out_dir == "results"
    with pytest.raises(ConfigError):
        with_overrides(cfg, seed=-1)


def test_load_config(tmp_path, gauss_config):
    good = tmp_path / "good.json"
    good.write_text(json.dumps(gauss_config), encoding="utf-8")
    np.testing.assert_array_equal(build_process(load_config(good)).drift.A, gauss_config["model"]["drift"])
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(bad)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
