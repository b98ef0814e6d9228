"""
Experiment configuration: JSON files parsed into frozen dataclasses.

Layout of a configuration file (every section optional except where a
command needs it):

    {
      "model":      {"drift": [[...]], "driver": {...}, "sigma0": [[...]]},
      "run":        {"horizon": 10.0, "n_samples": 1000, "seed": 0, "lags": [],
                     "grid_step": 0.1, "burn_in_tol": 1e-8, "n_sub": 16,
                     "progress": false},
      "output":     {"out_dir": ".", "path_csv": "path.csv",
                     "jumps_csv": "jumps.csv", "report_json": "report.json",
                     "draws_csv": "draws.csv", "diagnostics_json": "diagnostics.json"},
      "tolerances": {"psd_tol": 1e-10, "solve_cond_max": 1e12, "quad_epsabs": 1e-8},
      "extra":      {...}
    }

Unknown keys are rejected at every level. PSDOU_OUTPUT_DIR overrides
output.out_dir.
"""

import json
import logging
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np

from .driftop import DriftOperator
from .errors import ConfigError, PsdOUError
from .simulation import OUProcessSpec, SimulationOptions
from .subordinators import DEFAULT_N_SUB, SubordinatorModel, model_from_dict

logger = logging.getLogger(__name__)

OUTPUT_DIR_ENV: str = "PSDOU_OUTPUT_DIR"


@dataclass(frozen=True)
class ModelConfig:
    drift: List[List[float]]
    driver: Dict[str, Any]
    sigma0: Optional[List[List[float]]] = None


@dataclass(frozen=True)
class RunConfig:
    horizon: float = 10.0
    n_samples: int = 1000
    seed: int = 0
    lags: List[float] = field(default_factory=list)
    grid_step: float = 0.1
    burn_in_tol: float = 1e-8
    n_sub: int = DEFAULT_N_SUB
    progress: bool = False

    def validate(self) -> None:
        if not self.horizon > 0:
            raise ConfigError(f"run.horizon must be positive, got {self.horizon}.")
        if self.n_samples < 1:
            raise ConfigError(f"run.n_samples must be at least 1, got {self.n_samples}.")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("run.seed must be a 64-bit unsigned integer.")
        if any(h < 0 for h in self.lags):
            raise ConfigError(f"run.lags must be non-negative, got {self.lags}.")
        if not self.grid_step > 0:
            raise ConfigError(f"run.grid_step must be positive, got {self.grid_step}.")
        if not 0 < self.burn_in_tol < 1:
            raise ConfigError(f"run.burn_in_tol must lie in (0, 1), got {self.burn_in_tol}.")
        if self.n_sub < 1:
            raise ConfigError(f"run.n_sub must be at least 1, got {self.n_sub}.")


@dataclass(frozen=True)
class OutputConfig:
    out_dir: str = "."
    path_csv: str = "path.csv"
    jumps_csv: str = "jumps.csv"
    report_json: str = "report.json"
    draws_csv: str = "draws.csv"
    diagnostics_json: str = "diagnostics.json"

    def path(self, name: str) -> Path:
        """Resolves a file name against out_dir (absolute names are kept)."""
        p = Path(name)
        return p if p.is_absolute() else Path(self.out_dir) / p


@dataclass(frozen=True)
class ToleranceConfig:
    psd_tol: float = 1e-10
    solve_cond_max: float = 1e12
    quad_epsabs: float = 1e-8

    def validate(self) -> None:
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise ConfigError(f"tolerances.{f.name} must be positive.")


@dataclass(frozen=True)
class ExperimentConfig:
    model: Optional[ModelConfig] = None
    run: RunConfig = field(default_factory=RunConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    tolerances: ToleranceConfig = field(default_factory=ToleranceConfig)
    extra: Dict[str, Any] = field(default_factory=dict)


def _section(cls, data: Any, name: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"Section {name!r} must be a JSON object.")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"Unknown keys in {name!r}: {unknown}.")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"Section {name!r}: {exc}") from exc


def _coerce_run(run: RunConfig) -> RunConfig:
    try:
        return RunConfig(
            horizon=float(run.horizon),
            n_samples=int(run.n_samples),
            seed=int(run.seed),
            lags=[float(h) for h in run.lags],
            grid_step=float(run.grid_step),
            burn_in_tol=float(run.burn_in_tol),
            n_sub=int(run.n_sub),
            progress=bool(run.progress),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"Section 'run' has a value of the wrong type: {exc}") from exc


def parse_config(data: Dict[str, Any]) -> ExperimentConfig:
    """
    Validates a decoded configuration object. Dimension consistency of
    drift, driver and sigma0 is checked here, before any computation.
    """
    if not isinstance(data, dict):
        raise ConfigError("A configuration must be a JSON object.")
    unknown = sorted(set(data) - {f.name for f in fields(ExperimentConfig)})
    if unknown:
        raise ConfigError(f"Unknown top-level keys: {unknown}.")
    model = None
    if data.get("model") is not None:
        model = _section(ModelConfig, data["model"], "model")
    run = _coerce_run(_section(RunConfig, data.get("run"), "run"))
    run.validate()
    output = _section(OutputConfig, data.get("output"), "output")
    tolerances = _section(ToleranceConfig, data.get("tolerances"), "tolerances")
    tolerances.validate()
    extra = data.get("extra") or {}
    if not isinstance(extra, dict):
        raise ConfigError("Section 'extra' must be a JSON object.")
    env_dir = os.environ.get(OUTPUT_DIR_ENV)
    if env_dir:
        output = replace(output, out_dir=env_dir)
    cfg = ExperimentConfig(model=model, run=run, output=output, tolerances=tolerances, extra=extra)
    if model is not None:
        build_process(cfg)
    return cfg


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"Cannot read configuration {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"Configuration {path} is not valid JSON: {exc}") from exc
    logger.debug("Loaded configuration from %s.", path)
    return parse_config(data)


def build_driver(cfg: ExperimentConfig) -> SubordinatorModel:
    if cfg.model is None:
        raise ConfigError("This command needs a 'model' section.")
    driver = dict(cfg.model.driver)
    if driver.get("kind") == "type_gbar":
        driver.setdefault("n_sub", cfg.run.n_sub)
    try:
        return model_from_dict(driver)
    except PsdOUError as exc:
        raise ConfigError(f"model.driver: {exc}") from exc


def build_process(cfg: ExperimentConfig) -> OUProcessSpec:
    """OUProcessSpec from the model, run and tolerance sections."""
    if cfg.model is None:
        raise ConfigError("This command needs a 'model' section.")
    try:
        drift = DriftOperator(np.asarray(cfg.model.drift, dtype=float))
    except (PsdOUError, TypeError, ValueError) as exc:
        raise ConfigError(f"model.drift: {exc}") from exc
    driver = build_driver(cfg)
    options = SimulationOptions(
        grid_step=cfg.run.grid_step,
        burn_in_tol=cfg.run.burn_in_tol,
        quad_epsabs=cfg.tolerances.quad_epsabs,
        progress=cfg.run.progress,
    )
    try:
        return OUProcessSpec(drift, driver, cfg.model.sigma0, options)
    except PsdOUError as exc:
        raise ConfigError(f"model: {exc}") from exc


def with_overrides(cfg: ExperimentConfig, seed: Optional[int] = None, out_dir: Optional[str] = None) -> ExperimentConfig:
    """Applies command-line overrides on top of a parsed configuration."""
    run, output = cfg.run, cfg.output
    if seed is not None:
        run = replace(run, seed=int(seed))
        run.validate()
    if out_dir is not None:
        output = replace(output, out_dir=out_dir)
    return replace(cfg, run=run, output=output)
