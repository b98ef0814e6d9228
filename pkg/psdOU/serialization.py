"""
JSON and CSV artifacts: process specifications, moment reports, method of
moments estimates, paths, jump logs and stationary draws.

JSON uses a fixed key order and round-trip float formatting; CSV files carry
the vech column order s_11, s_21, ..., s_dd and floats with 17 significant
digits, so identical inputs give byte-identical files.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from .calibration import DriftCondition, MoMEstimate
from .driftop import DriftOperator
from .errors import ConfigError, DimensionError
from .moments import MomentReport, PsdDiagnostics
from .simulation import OUPath, OUProcessSpec
from .subordinators import JumpRecord, model_from_dict
from .symcore import SymMat, unvech, vech, vech_labels

logger = logging.getLogger(__name__)

CSV_FLOAT_FORMAT: str = "%.17g"
PathLike = Union[str, Path]


def to_plain(value: Any) -> Any:
    """
    Converts arrays, symmetric matrices and complex numbers into JSON-ready
    values. Non-finite floats become null.
    """
    if isinstance(value, SymMat):
        return to_plain(value.entries)
    if isinstance(value, DriftOperator):
        return to_plain(value.A)
    if isinstance(value, np.ndarray):
        return [to_plain(v) for v in value.tolist()] if value.ndim else to_plain(value.item())
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": to_plain(float(value.real)), "im": to_plain(float(value.imag))}
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value) if np.isfinite(value) else None
    return value


def dumps(obj: Any) -> str:
    return json.dumps(to_plain(obj), indent=2, allow_nan=False) + "\n"


def write_json(obj: Any, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj), encoding="utf-8")
    logger.debug("Wrote %s.", path)
    return path


def read_json(path: PathLike) -> Any:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"Cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc


def _lag_key(h: float) -> str:
    return repr(float(h))


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


def moment_report_to_dict(report: MomentReport) -> Dict[str, Any]:
    out: Dict[str, Any] = {
        "mean": report.mean.entries,
        "var_vec": report.var_vec,
        "autocov": {_lag_key(h): report.autocov[h] for h in sorted(report.autocov)},
        "provenance": report.provenance,
    }
    if report.gamma_sigma is not None:
        out["gamma_sigma"] = report.gamma_sigma.entries
    if report.n_samples is not None:
        out["n_samples"] = report.n_samples
    if report.std_errors is not None:
        se = report.std_errors
        out["std_errors"] = {
            "mean": se["mean"],
            "var_vec": se["var_vec"],
            "autocov": {_lag_key(h): se["autocov"][h] for h in sorted(se["autocov"])},
        }
    return to_plain(out)


def moment_report_from_dict(data: Dict[str, Any]) -> MomentReport:
    try:
        autocov = {float(k): np.asarray(v, dtype=float) for k, v in data["autocov"].items()}
        std_errors = None
        if data.get("std_errors") is not None:
            se = data["std_errors"]
            std_errors = {
                "mean": np.asarray(se["mean"], dtype=float),
                "var_vec": np.asarray(se["var_vec"], dtype=float),
                "autocov": {float(k): np.asarray(v, dtype=float) for k, v in se["autocov"].items()},
            }
        return MomentReport(
            mean=SymMat(data["mean"]),
            var_vec=np.asarray(data["var_vec"], dtype=float),
            autocov=autocov,
            provenance=str(data["provenance"]),
            std_errors=std_errors,
            gamma_sigma=SymMat(data["gamma_sigma"]) if data.get("gamma_sigma") is not None else None,
            n_samples=data.get("n_samples"),
        )
    except (KeyError, TypeError, AttributeError) as exc:
        raise ConfigError(f"Malformed moment report: {exc}") from exc


def mom_estimate_to_dict(est: MoMEstimate, condition: Optional[DriftCondition] = None) -> Dict[str, Any]:
    out: Dict[str, Any] = {
        "A_hat": est.A_hat.A,
        "mean_L": est.mean_L.entries,
        "var_vec_L": est.var_vec_L,
        "lags": est.lags,
        "stable": est.stable,
        "residuals": {k: est.residuals[k] for k in sorted(est.residuals)},
        "subordinator_check": {"mean_L_psd": est.mean_L_psd, "var_vec_L_psd": est.var_vec_L_psd},
    }
    if condition is not None:
        out["drift_condition"] = condition.to_dict()
    return to_plain(out)


def diagnostics_to_dict(diag: PsdDiagnostics) -> Dict[str, Any]:
    return to_plain(diag.to_dict())


def process_spec_to_dict(spec: OUProcessSpec) -> Dict[str, Any]:
    return to_plain({"drift": spec.drift.A, "driver": spec.driver.to_dict(), "sigma0": spec.sigma0.entries})


def process_spec_from_dict(data: Dict[str, Any]) -> OUProcessSpec:
    return OUProcessSpec(DriftOperator(data["drift"]), model_from_dict(data["driver"]), data.get("sigma0"))


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def _vech_rows(mats: np.ndarray) -> np.ndarray:
    mats = np.asarray(mats, dtype=float)
    if mats.ndim != 3:
        raise DimensionError(f"Expected a stack of matrices, got shape {mats.shape}.")
    d = mats.shape[1]
    return np.array([vech(m) for m in mats]).reshape(mats.shape[0], d * (d + 1) // 2)


def path_to_frame(path: OUPath) -> pd.DataFrame:
    frame = pd.DataFrame(_vech_rows(path.states), columns=vech_labels(path.dim))
    frame.insert(0, "time", path.times)
    return frame


def jumps_to_frame(jumps: Sequence[JumpRecord], dim: int) -> pd.DataFrame:
    mats = np.array([j.matrix for j in jumps]).reshape(len(jumps), dim, dim)
    frame = pd.DataFrame(_vech_rows(mats), columns=vech_labels(dim))
    frame.insert(0, "time", [j.time for j in jumps])
    return frame


def draws_to_frame(draws: np.ndarray) -> pd.DataFrame:
    draws = np.asarray(draws, dtype=float)
    frame = pd.DataFrame(_vech_rows(draws), columns=vech_labels(draws.shape[1]))
    frame.insert(0, "sample", np.arange(draws.shape[0]))
    return frame


def frame_to_matrices(frame: pd.DataFrame) -> np.ndarray:
    """Inverse of the vech CSV layout: the s_ij columns back to (n, d, d)."""
    cols = [c for c in frame.columns if c.startswith("s_")]
    if not cols:
        raise ConfigError("CSV has no s_ij columns.")
    rows = frame[cols].to_numpy(dtype=float)
    mats = np.array([unvech(r) for r in rows])
    d = mats.shape[1]
    if cols != vech_labels(d):
        raise ConfigError(f"CSV columns {cols} are not in vech order.")
    return mats


def write_csv(frame: pd.DataFrame, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    logger.debug("Wrote %s (%d rows).", path, len(frame))
    return path


def read_draws_csv(path: PathLike) -> np.ndarray:
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except (OSError, pd.errors.ParserError) as exc:
        raise ConfigError(f"Cannot read draws CSV {path}: {exc}") from exc
    return frame_to_matrices(frame)


def emit_report(report: Any, path: PathLike, fmt: str = "json") -> Path:
    """
    Writes a library result: JSON for reports, CSV for paths and draws.
    """
    if fmt == "json":
        if isinstance(report, MomentReport):
            return write_json(moment_report_to_dict(report), path)
        if isinstance(report, MoMEstimate):
            return write_json(mom_estimate_to_dict(report), path)
        if isinstance(report, PsdDiagnostics):
            return write_json(diagnostics_to_dict(report), path)
        return write_json(report, path)
    if fmt == "csv":
        if isinstance(report, OUPath):
            return write_csv(path_to_frame(report), path)
        if isinstance(report, pd.DataFrame):
            return write_csv(report, path)
        if isinstance(report, np.ndarray):
            return write_csv(draws_to_frame(report), path)
        raise ConfigError(f"No CSV layout for {type(report).__name__}.")
    raise ConfigError(f"Unknown report format {fmt!r}; expected 'json' or 'csv'.")
