#!/usr/bin/env python
"""
Command-line interface (CLI) for psdOU.
Runs simulation, moment, fitting, subordinator and validation pipelines from
a JSON experiment configuration and writes CSV/JSON artifacts.

Exit codes: 0 success, 2 configuration error, 3 numerical or model failure,
4 failed validation.
"""

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np
import pandas as pd
from colorama import Fore, Style, init

init(autoreset=True)

from .calibration import mom_fit
from .config import OUTPUT_DIR_ENV, ExperimentConfig, build_process, load_config, parse_config, with_overrides
from .driftop import DriftOperator, extract_generator, recover_from_basis_action, semigroup_evaluator
from .errors import ConfigError, PsdOUError, ValidationFailure
from .mixing import mixing_from_dict
from .moments import empirical_moments, path_moments, psd_diagnostics, stationary_moments
from .serialization import (
    diagnostics_to_dict,
    dumps,
    emit_report,
    frame_to_matrices,
    jumps_to_frame,
    mom_estimate_to_dict,
    moment_report_from_dict,
    read_json,
    write_csv,
    write_json,
)
from .simulation import sample_stationary_pairs, simulate_path
from .subordinators import (
    DiagonalCP,
    build_multivariate_subordinator,
    cp_factorize,
    driver_moments,
    mixture_qv_moments,
)
from .utils import make_rng
from .validation import available_suites, run_suites

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_VALIDATION = 4

SUBORDINATOR_KEYS = {"mu", "C", "B", "k", "mixing", "rate", "qv_kind"}
EXTRACT_KEYS = {"drift", "images", "h0", "tol"}


def _status(color: str, message: str) -> None:
    print(color + message + Style.RESET_ALL, file=sys.stderr)


def _wrote(path: Path) -> None:
    _status(Fore.GREEN, f"Wrote {path}")


def _primary_override(cfg: ExperimentConfig, out: Optional[str], primary: str) -> ExperimentConfig:
    """
    --out names a directory, or, with a .csv/.json suffix, the command's
    primary artifact (its directory then becomes out_dir).
    """
    if out is None:
        return cfg
    target = Path(out)
    if target.suffix.lower() in (".csv", ".json"):
        output = replace(cfg.output, out_dir=str(target.parent), **{primary: target.name})
        return replace(cfg, output=output)
    return with_overrides(cfg, out_dir=str(target))


def _section(cfg: ExperimentConfig, name: str, allowed: set) -> Dict[str, Any]:
    data = cfg.extra.get(name) or {}
    if not isinstance(data, dict):
        raise ConfigError(f"extra.{name} must be a JSON object.")
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"Unknown keys in extra.{name}: {unknown}.")
    return data


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_simulate(args: argparse.Namespace, cfg: ExperimentConfig) -> List[Path]:
    spec = build_process(cfg)
    _status(Fore.CYAN, f"Simulating {spec!r} on [0, {cfg.run.horizon}]...")
    path = simulate_path(spec, cfg.run.horizon, make_rng(cfg.run.seed))
    written = [
        emit_report(path, cfg.output.path(cfg.output.path_csv), fmt="csv"),
        write_csv(jumps_to_frame(path.jumps, spec.dim), cfg.output.path(cfg.output.jumps_csv)),
    ]
    diag = psd_diagnostics(path, pd_tol=cfg.tolerances.psd_tol)
    _status(Fore.MAGENTA, f"{len(path.times)} states, {len(path.jumps)} jumps, min eigenvalue {diag.min_eigenvalue:.3e}")
    if args.plot:
        from .visualization import plot_path

        written.append(plot_path(path, cfg.output.path(args.plot)))
    return written


def cmd_moments(args: argparse.Namespace, cfg: ExperimentConfig) -> List[Path]:
    spec = build_process(cfg)
    report = stationary_moments(spec, lags=cfg.run.lags, cond_max=cfg.tolerances.solve_cond_max)
    return [emit_report(report, cfg.output.path(cfg.output.report_json))]


def cmd_sample_stationary(args: argparse.Namespace, cfg: ExperimentConfig) -> List[Path]:
    spec = build_process(cfg)
    _status(Fore.CYAN, f"Drawing {cfg.run.n_samples} stationary samples...")
    draws, lagged = sample_stationary_pairs(spec, cfg.run.n_samples, cfg.run.lags, make_rng(cfg.run.seed))
    written = [emit_report(draws, cfg.output.path(cfg.output.draws_csv), fmt="csv")]
    diag = psd_diagnostics(draws, pd_tol=cfg.tolerances.psd_tol)
    written.append(write_json(diagnostics_to_dict(diag), cfg.output.path(cfg.output.diagnostics_json)))
    if cfg.run.n_samples >= 2:
        written.append(emit_report(empirical_moments(draws, lagged), cfg.output.path(cfg.output.report_json)))
    else:
        logger.warning("One draw only; no Monte Carlo moment report written.")
    if args.plot:
        from .visualization import plot_draws

        written.append(plot_draws(draws, cfg.output.path(args.plot)))
    return written


def _path_states(frame: pd.DataFrame, step: float, burn_in: float) -> np.ndarray:
    """States on the grid t = k * step, t >= burn_in; rows without a time column are taken as equally spaced."""
    states = frame_to_matrices(frame)
    if "time" not in frame.columns:
        return states
    t = frame["time"].to_numpy(dtype=float)
    k = np.round(t / step)
    on_grid = (np.abs(t - k * step) <= 1e-9 * (1.0 + np.abs(t))) & (t >= burn_in)
    _, first = np.unique(k[on_grid], return_index=True)
    return states[on_grid][first]


def cmd_fit(args: argparse.Namespace, cfg: ExperimentConfig) -> List[Path]:
    source = Path(args.input)
    if source.suffix.lower() == ".json":
        report = moment_report_from_dict(read_json(source))
    elif source.suffix.lower() == ".csv":
        step = args.step if args.step is not None else cfg.run.grid_step
        try:
            frame = pd.read_csv(source, float_precision="round_trip")
        except (OSError, pd.errors.ParserError) as exc:
            raise ConfigError(f"Cannot read {source}: {exc}") from exc
        lags = cfg.run.lags or [step]
        report = path_moments(_path_states(frame, step, args.burn_in), step, lags, n_batches=args.batches)
    else:
        raise ConfigError(f"fit reads a moments .json or a states .csv, got {source}.")
    est = mom_fit(report, lag=args.lag, multi_lag=args.multi_lag)
    level = Fore.GREEN if est.stable else Fore.YELLOW
    _status(level, f"Fitted drift at lags {est.lags}; stable={est.stable}")
    return [write_json(mom_estimate_to_dict(est), cfg.output.path(cfg.output.report_json))]


def cmd_subordinator(args: argparse.Namespace, cfg: ExperimentConfig) -> List[Path]:
    section = _section(cfg, "subordinator", SUBORDINATOR_KEYS)
    rng = make_rng(cfg.run.seed)
    out: Dict[str, Any] = {}
    C = section.get("C")
    B = section.get("B")
    if C is not None and B is None:
        fact = cp_factorize(C, k=section.get("k"), rng=rng)
        if fact.found:
            B = fact.B
        out["cp_factorization"] = {
            "status": fact.status, "B": fact.B, "residual": fact.residual, "k": fact.k, "attempts": fact.attempts,
        }
    if section.get("mu") is not None:
        model = build_multivariate_subordinator(section["mu"], C=C, B=B, k=section.get("k"), rng=rng)
        out["driver"] = model.to_dict()
        if isinstance(model, DiagonalCP):
            out["lambda"] = model.jump_rate_param
        mom = driver_moments(model)
        out["driver_moments"] = {"mean": mom.mean, "var_vec": mom.var_vec}
    if section.get("mixing") is not None:
        if C is None:
            raise ConfigError("extra.subordinator.mixing needs C.")
        mixing = mixing_from_dict(section["mixing"])
        kind = section.get("qv_kind", "cp")
        qv = mixture_qv_moments(kind, mixing.moments(), C, r=section.get("rate"))
        out["mixture_qv_moments"] = {"kind": kind, "mean": qv.mean, "var_vec": qv.var_vec}
    if not out:
        if cfg.model is None:
            raise ConfigError("subordinator needs extra.subordinator or a model section.")
        driver = build_process(cfg).driver
        mom = driver_moments(driver)
        out = {"driver": driver.to_dict(), "driver_moments": {"mean": mom.mean, "var_vec": mom.var_vec}}
    if "cp_factorization" in out and out["cp_factorization"]["status"] != "found":
        _status(Fore.YELLOW, "No completely positive factor found within tolerance.")
    return [write_json(out, cfg.output.path(cfg.output.report_json))]


def cmd_extract_op(args: argparse.Namespace, cfg: ExperimentConfig) -> List[Path]:
    section = _section(cfg, "extract_op", EXTRACT_KEYS)
    if section.get("images") is not None:
        op = recover_from_basis_action([np.asarray(m, dtype=float) for m in section["images"]])
        out: Dict[str, Any] = {"method": "basis_action", "A_hat": op.A}
    else:
        if section.get("drift") is not None:
            reference = DriftOperator(section["drift"])
        elif cfg.model is not None:
            reference = build_process(cfg).drift
        else:
            raise ConfigError("extract-op needs extra.extract_op.drift, extra.extract_op.images or a model section.")
        op = extract_generator(
            semigroup_evaluator(reference), reference.dim,
            h0=section.get("h0"), tol=float(section.get("tol", 1e-8)),
        )
        err = float(np.linalg.norm(op.A - reference.A))
        out = {"method": "semigroup", "A_hat": op.A, "frobenius_error": err}
    return [write_json(out, cfg.output.path(cfg.output.report_json))]


def cmd_validate(args: argparse.Namespace, cfg: ExperimentConfig) -> List[Path]:
    if not args.scale > 0:
        raise ConfigError(f"--scale must be positive, got {args.scale}.")
    _status(Fore.CYAN, f"Running validation suite {args.suite!r}...")
    result = run_suites([args.suite], seed=cfg.run.seed, scale=args.scale)
    path = write_json(result, cfg.output.path(cfg.output.report_json))
    _wrote(path)
    for suite in result["suites"]:
        color = Fore.GREEN if suite["passed"] else Fore.RED
        _status(color, f"  {suite['suite']}: {suite['n_checks'] - suite['n_failed']}/{suite['n_checks']} checks passed")
    if not result["passed"]:
        failed = [s["suite"] for s in result["suites"] if not s["passed"]]
        raise ValidationFailure(f"Validation failed for {failed}; see {path}.")
    return []


PRIMARY_ARTIFACT: Dict[str, str] = {
    "simulate": "path_csv",
    "moments": "report_json",
    "sample-stationary": "draws_csv",
    "fit": "report_json",
    "subordinator": "report_json",
    "extract-op": "report_json",
    "validate": "report_json",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="psdOU",
        description="psdOU CLI: simulate, analyse and calibrate positive semidefinite OU processes.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment configuration")
    common.add_argument("--seed", type=int, help="Master seed (overrides run.seed)")
    common.add_argument("--out", help="Output directory, or the primary artifact file (.csv/.json)")
    common.add_argument("--error-file", help="Where to write the error JSON (default <out_dir>/error.json)")
    common.add_argument("--verbose", action="store_true", help="Debug logging on stderr")
    subparsers = parser.add_subparsers(title="subcommands", dest="command")

    parser_sim = subparsers.add_parser("simulate", parents=[common], help="Simulate one path; write path and jump CSVs.")
    parser_sim.add_argument("--plot", help="Also write a PNG of the path")
    parser_sim.set_defaults(func=cmd_simulate)

    parser_mom = subparsers.add_parser("moments", parents=[common], help="Closed-form stationary moments as JSON.")
    parser_mom.set_defaults(func=cmd_moments)

    parser_stat = subparsers.add_parser(
        "sample-stationary", parents=[common], help="Stationary draws CSV plus Monte Carlo moments."
    )
    parser_stat.add_argument("--plot", help="Also write a PNG histogram of the draws")
    parser_stat.set_defaults(func=cmd_sample_stationary)

    parser_fit = subparsers.add_parser("fit", parents=[common], help="Method-of-moments fit from moments JSON or states CSV.")
    parser_fit.add_argument("--input", required=True, help="Moments .json or states .csv")
    parser_fit.add_argument("--lag", type=float, help="Lag used for the fit (default: smallest positive)")
    parser_fit.add_argument("--multi-lag", action="store_true", help="Stack all positive lags")
    parser_fit.add_argument("--step", type=float, help="Spacing of CSV states (default run.grid_step)")
    parser_fit.add_argument("--burn-in", type=float, default=0.0, help="Drop CSV states before this time")
    parser_fit.add_argument("--batches", type=int, default=20, help="Batch count for standard errors")
    parser_fit.set_defaults(func=cmd_fit)

    parser_sub = subparsers.add_parser(
        "subordinator", parents=[common], help="Factorize, build and describe matrix subordinators."
    )
    parser_sub.set_defaults(func=cmd_subordinator)

    parser_ext = subparsers.add_parser("extract-op", parents=[common], help="Recover A from semigroup probes.")
    parser_ext.set_defaults(func=cmd_extract_op)

    parser_val = subparsers.add_parser("validate", parents=[common], help="Run acceptance suites.")
    parser_val.add_argument("--suite", default="all", choices=available_suites(include_aliases=True) + ["all"], help="Suite name")
    parser_val.add_argument("--scale", type=float, default=1.0, help="Monte Carlo sample-size factor")
    parser_val.set_defaults(func=cmd_validate)
    return parser


def _configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )


def _fallback_error_file(args: argparse.Namespace) -> Path:
    """error.json next to the requested output when the configuration could not be read."""
    if args.out:
        out = Path(args.out)
        return (out.parent if out.suffix.lower() in (".csv", ".json") else out) / "error.json"
    return Path(os.environ.get(OUTPUT_DIR_ENV) or ".") / "error.json"


def _report_error(exc: BaseException, error_file: Optional[Path]) -> None:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    print(dumps(payload), end="")
    _status(Fore.RED, f"{type(exc).__name__}: {exc}")
    if error_file is not None:
        try:
            write_json(payload, error_file)
        except OSError as io_exc:
            logger.warning("Could not write %s: %s", error_file, io_exc)


def run_command(argv: Optional[List[str]] = None) -> int:
    """
    Parses argv, runs one subcommand and returns its exit code. Errors are
    reported as {"error": ..., "message": ...} on stdout and in the error file.
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_CONFIG
    _configure_logging(args.verbose)
    error_file: Optional[Path] = Path(args.error_file) if args.error_file else None
    handler: Callable[[argparse.Namespace, ExperimentConfig], List[Path]] = args.func
    try:
        cfg = load_config(args.config) if args.config else parse_config({})
        cfg = with_overrides(cfg, seed=args.seed)
        cfg = _primary_override(cfg, args.out, PRIMARY_ARTIFACT[args.command])
        if error_file is None:
            error_file = cfg.output.path("error.json")
        for path in handler(args, cfg):
            _wrote(path)
    except ValidationFailure as exc:
        _report_error(exc, error_file)
        return EXIT_VALIDATION
    except ConfigError as exc:
        _report_error(exc, error_file or _fallback_error_file(args))
        return EXIT_CONFIG
    except (PsdOUError, ArithmeticError, OSError) as exc:
        _report_error(exc, error_file)
        return EXIT_NUMERICAL
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    return run_command(argv)


if __name__ == "__main__":
    sys.exit(main())
