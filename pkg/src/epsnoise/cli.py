"""Configuration-driven command line front end.

Commands:
  sweep <config>      Monte Carlo BER sweeps, one CSV per (detector, tail)
  analytic <config>   closed-form curves, with per-addend columns where defined
  compare <a> <b>     row-by-row CSV comparison with tolerance or ordering rules
  selftest            run the acceptance suite

Exit codes: 0 ok, 1 comparison/selftest failure, 2 config parse error,
3 validation error, 4 runtime or quadrature-convergence error.

Config files are INI-style key/value sections; see README for the schema.
The EPSNOISE_WORKERS environment variable overrides the configured worker
count and never changes numeric results.
"""

import argparse
import configparser
import csv
import json
import math
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .analytic import (
    alamouti_gaussian_ber,
    alamouti_reference_spec,
    ber_gaussian_closed,
    ber_gaussian_integral,
    ber_gaussian_upper,
    ber_mixture_addends,
    ber_ml_genie_general,
    ber_mlbnr_general,
    ber_mlbnr_optimal_addends,
    ber_mls_general,
)
from .detectors import DETECTOR_KINDS, GENIE_DETECTORS, WConfig
from .model import SYSTEM_NAMES, TAILS
from .montecarlo import ExperimentConfig, NoiseSetting, estimate_ber, resolve_workers, run_sweep
from .numerics import ConvergenceError

EXIT_OK = 0
EXIT_COMPARE_FAIL = 1
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_RUNTIME = 4

ANALYTIC_FORMULAS = (
    "mixture_mls",
    "mlbnr_optimal",
    "gaussian_closed",
    "gaussian_upper",
    "gaussian_integral",
    "repcode_ml",
    "repcode_mlbnr",
    "repcode_mls",
)

REPCODE_DIFFERENCES = (2.0, 2.0, 2.0)


class ConfigError(Exception):
    """Config file could not be parsed (missing section/field, bad syntax)."""


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


# ---------------------------------------------------------------------------
# config parsing

def read_config(path) -> dict:
    """Parse an INI config file into a plain {section: {key: value}} dict."""
    parser = configparser.ConfigParser()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh, source=str(path))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    return {s: dict(parser.items(s)) for s in parser.sections()}


def _get(sections: dict, section: str, key: str, default=None, required: bool = False):
    try:
        return sections[section][key]
    except KeyError:
        if required:
            raise ConfigError(f"missing required field [{section}] {key}") from None
        return default


def _parse_float(sections, section, key, default=None, required=False) -> float:
    raw = _get(sections, section, key, default=None, required=required)
    if raw is None:
        return default
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"field [{section}] {key} = {raw!r} is not a number") from None


def _parse_int(sections, section, key, default=None, required=False) -> int:
    raw = _get(sections, section, key, default=None, required=required)
    if raw is None:
        return default
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"field [{section}] {key} = {raw!r} is not an integer") from None


def _parse_list(raw: str):
    return [tok for tok in raw.replace(",", " ").split() if tok]


def _parse_grid(sections) -> list:
    raw = _get(sections, "run", "snr_db", required=True)
    try:
        grid = [float(tok) for tok in _parse_list(raw)]
    except ValueError:
        raise ConfigError(f"field [run] snr_db = {raw!r} is not a list of numbers") from None
    if not grid:
        raise ConfigError("field [run] snr_db must list at least one SNR point")
    return grid


def build_noise_setting(sections: dict, snr_db: float, tail: str) -> NoiseSetting:
    return NoiseSetting(
        snr_db=snr_db,
        epsilon=_parse_float(sections, "noise", "epsilon", 0.0),
        gamma=_parse_float(sections, "noise", "gamma", 1.0),
        mode=_get(sections, "noise", "mode", "background"),
        tail=tail,
    )


def build_wconfig(sections: dict) -> WConfig:
    return WConfig(
        p2=_parse_float(sections, "detector", "p2", WConfig().p2),
        max_iterations=_parse_int(sections, "detector", "max_iterations", WConfig().max_iterations),
        weight_change_tol=_parse_float(sections, "detector", "weight_change_tol",
                                       WConfig().weight_change_tol),
        biweight_convention=_get(sections, "detector", "biweight_convention",
                                 WConfig().biweight_convention),
    )


def build_experiment(sections: dict, detector: str, tail: str) -> ExperimentConfig:
    """Resolve one (detector, tail) combination into an engine configuration.

    The SNR in the returned config is the first grid point; run_sweep
    replaces it per point.
    """
    grid = _parse_grid(sections)
    return ExperimentConfig(
        system=_get(sections, "system", "name", "alamouti2x2"),
        detector=detector,
        wconfig=build_wconfig(sections),
        noise=build_noise_setting(sections, grid[0], tail),
        genie=detector in GENIE_DETECTORS,
        stop_errors=_parse_int(sections, "run", "stop_errors", 300),
        max_bits=_parse_int(sections, "run", "max_bits", 100_000_000),
        seed=_parse_int(sections, "run", "seed", 0),
        chunk_size=_parse_int(sections, "run", "chunk_size", 65536),
    )


def resolved_config_echo(sections: dict, detectors, tails) -> dict:
    """Full materialized config for the manifest: re-parsing this dict yields
    the identical experiment set (round-trip property)."""
    wcfg = build_wconfig(sections)
    echo = {
        "system": {"name": _get(sections, "system", "name", "alamouti2x2")},
        "detector": {
            "kind": " ".join(detectors),
            "p2": _fmt(wcfg.p2),
            "max_iterations": str(wcfg.max_iterations),
            "weight_change_tol": _fmt(wcfg.weight_change_tol),
            "biweight_convention": wcfg.biweight_convention,
        },
        "noise": {
            "epsilon": _fmt(_parse_float(sections, "noise", "epsilon", 0.0)),
            "gamma": _fmt(_parse_float(sections, "noise", "gamma", 1.0)),
            "mode": _get(sections, "noise", "mode", "background"),
            "tail": " ".join(tails),
        },
        "run": {
            "snr_db": " ".join(_fmt(s) for s in _parse_grid(sections)),
            "stop_errors": str(_parse_int(sections, "run", "stop_errors", 300)),
            "max_bits": str(_parse_int(sections, "run", "max_bits", 100_000_000)),
            "seed": str(_parse_int(sections, "run", "seed", 0)),
            "chunk_size": str(_parse_int(sections, "run", "chunk_size", 65536)),
            "workers": str(_parse_int(sections, "run", "workers", 1)),
        },
        "output": {
            "directory": _get(sections, "output", "directory", "."),
            "prefix": _get(sections, "output", "prefix", "run"),
        },
    }
    if "analytic" in sections:
        echo["analytic"] = {
            "formula": _get(sections, "analytic", "formula", ""),
            "n": _fmt(_parse_float(sections, "analytic", "n", 8.0)),
        }
    return echo


def _output_paths(sections: dict, outdir):
    directory = Path(outdir) if outdir else Path(_get(sections, "output", "directory", "."))
    prefix = _get(sections, "output", "prefix", "run")
    directory.mkdir(parents=True, exist_ok=True)
    return directory, prefix


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_manifest(path: Path, experiment: str, command: str, echo: dict, outputs) -> None:
    manifest = {
        "experiment": experiment,
        "command": command,
        "config": echo,
        "tool_version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "outputs": [str(p) for p in outputs],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# sweep

def cmd_sweep(config_path, outdir=None, workers=None) -> int:
    sections = read_config(config_path)
    detectors = _parse_list(_get(sections, "detector", "kind", "mls"))
    for d in detectors:
        if d not in DETECTOR_KINDS:
            raise ValueError(f"unknown detector {d!r}, expected one of {DETECTOR_KINDS}")
    tails = _parse_list(_get(sections, "noise", "tail", "gaussian"))
    for t in tails:
        if t not in TAILS:
            raise ValueError(f"unknown tail {t!r}, expected one of {TAILS}")
    grid = _parse_grid(sections)
    workers = resolve_workers(workers if workers is not None
                              else _parse_int(sections, "run", "workers", None))

    directory, prefix = _output_paths(sections, outdir)
    outputs = []
    for detector in detectors:
        for tail in tails:
            cfg = build_experiment(sections, detector, tail)
            results = run_sweep(cfg, grid, workers)
            rows = [
                (snr, est.ber, est.std_error, est.bit_errors, est.bits, est.stopped_by)
                for snr, est in results
            ]
            path = directory / f"{prefix}_{detector}_{tail}.csv"
            _write_csv(path, ("snr_db", "ber", "std_error", "bit_errors", "bits", "stopped_by"), rows)
            outputs.append(path)
            print(f"wrote {path}")
    echo = resolved_config_echo(sections, detectors, tails)
    manifest_path = directory / f"{prefix}_manifest.json"
    _write_manifest(manifest_path, prefix, "sweep", echo, outputs)
    print(f"wrote {manifest_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# analytic curves

def _analytic_rows(sections: dict, formula: str, grid):
    """(header, rows) for one formula over the SNR grid.

    The gaussian/mixture/genie-bound curves for the 2Tx2Rx scheme are
    evaluated on the unit-total-power reference scale that matches the
    simulator's unit-energy symbols (sigma^2 = per-dimension variance / 2).
    """
    n = _parse_float(sections, "analytic", "n", 8.0)
    header = ["snr_db", "value"]
    if formula in ("mixture_mls", "mlbnr_optimal"):
        header += [f"addend{i}" for i in range(1, 6)]
    rows = []
    for snr in grid:
        spec = build_noise_setting(sections, snr, "gaussian").resolve()
        if formula == "mixture_mls":
            addends = ber_mixture_addends(spec)
            rows.append([snr, sum(addends)] + addends)
        elif formula == "mlbnr_optimal":
            addends = ber_mlbnr_optimal_addends(alamouti_reference_spec(spec))
            rows.append([snr, sum(addends)] + addends)
        elif formula == "gaussian_closed":
            rows.append([snr, ber_gaussian_closed(math.sqrt(spec.sigma1_sq / 2.0), n)])
        elif formula == "gaussian_upper":
            rows.append([snr, ber_gaussian_upper(math.sqrt(spec.sigma1_sq / 2.0), n)])
        elif formula == "gaussian_integral":
            rows.append([snr, ber_gaussian_integral(math.sqrt(spec.sigma1_sq / 2.0), n)])
        elif formula == "repcode_ml":
            rows.append([snr, ber_ml_genie_general(REPCODE_DIFFERENCES, spec)])
        elif formula == "repcode_mlbnr":
            rows.append([snr, ber_mlbnr_general(REPCODE_DIFFERENCES, spec)])
        elif formula == "repcode_mls":
            rows.append([snr, ber_mls_general(REPCODE_DIFFERENCES, spec)])
        else:
            raise ValueError(
                f"unknown formula {formula!r}, expected one of {ANALYTIC_FORMULAS}"
            )
    return header, rows


def cmd_analytic(config_path, outdir=None) -> int:
    sections = read_config(config_path)
    formula = _get(sections, "analytic", "formula", required=True)
    grid = _parse_grid(sections)
    header, rows = _analytic_rows(sections, formula, grid)
    directory, prefix = _output_paths(sections, outdir)
    path = directory / f"{prefix}_{formula}.csv"
    _write_csv(path, header, rows)
    echo = resolved_config_echo(sections, [], _parse_list(_get(sections, "noise", "tail", "gaussian")))
    manifest_path = directory / f"{prefix}_{formula}_manifest.json"
    _write_manifest(manifest_path, f"{prefix}_{formula}", "analytic", echo, [path])
    print(f"wrote {path}")
    print(f"wrote {manifest_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# compare

def _read_csv_columns(path):
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path} is empty") from None
        rows = [row for row in reader if row]
    columns = {name: [] for name in header}
    for row in rows:
        for name, value in zip(header, row):
            columns[name].append(value)
    return columns


def _value_column(columns, path):
    for name in ("ber", "value"):
        if name in columns:
            return name
    raise ValueError(f"{path} has neither a 'ber' nor a 'value' column")


def cmd_compare(path_a, path_b, rel=None, abs_tol=None, sigma=None, rule="tolerance") -> int:
    a = _read_csv_columns(path_a)
    b = _read_csv_columns(path_b)
    if "snr_db" not in a or "snr_db" not in b:
        raise ValueError("both files need an snr_db column")
    grid_a = [float(v) for v in a["snr_db"]]
    grid_b = [float(v) for v in b["snr_db"]]
    if grid_a != grid_b:
        raise ValueError(f"snr_db grids differ: {grid_a} vs {grid_b}")
    va = [float(v) for v in a[_value_column(a, path_a)]]
    vb = [float(v) for v in b[_value_column(b, path_b)]]
    sa = [float(v) for v in a.get("std_error", ["nan"] * len(va))]
    sb = [float(v) for v in b.get("std_error", ["nan"] * len(vb))]

    if rule == "tolerance" and rel is None and abs_tol is None and sigma is None:
        raise ValueError("give at least one of --rel/--abs/--sigma (or --rule b-ge-a)")

    failures = []
    worst = None  # (margin, row description)
    for i, snr in enumerate(grid_a):
        diff = abs(va[i] - vb[i])
        if rule == "b-ge-a":
            ok = vb[i] >= va[i]
            margin = va[i] - vb[i]
        else:
            checks = []
            if abs_tol is not None:
                checks.append(diff <= abs_tol)
            if rel is not None:
                checks.append(diff <= rel * max(abs(va[i]), abs(vb[i])))
            if sigma is not None:
                combined = math.sqrt(
                    (sa[i] if math.isfinite(sa[i]) else 0.0) ** 2
                    + (sb[i] if math.isfinite(sb[i]) else 0.0) ** 2
                )
                checks.append(combined > 0.0 and diff <= sigma * combined)
            ok = any(checks)
            margin = diff
        desc = f"snr_db={_fmt(snr)}: a={_fmt(va[i])} b={_fmt(vb[i])} |diff|={_fmt(diff)}"
        if worst is None or margin > worst[0]:
            worst = (margin, desc)
        if not ok:
            failures.append(desc)

    print(f"compared {len(grid_a)} rows: {len(grid_a) - len(failures)} pass, {len(failures)} fail")
    if worst is not None:
        print(f"worst row: {worst[1]}")
    for desc in failures:
        print(f"FAIL {desc}")
    return EXIT_OK if not failures else EXIT_COMPARE_FAIL


# ---------------------------------------------------------------------------
# selftest

def cmd_selftest(only=None, workers=None) -> int:
    from .acceptance import run_all

    results = run_all(only=only, workers=workers)
    return EXIT_OK if all(passed for _, passed, _ in results) else EXIT_COMPARE_FAIL


# ---------------------------------------------------------------------------
# entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="epsnoise",
        description="Alamouti 2Tx2Rx BER simulation and analysis in mixture (background + impulse) noise",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="run Monte Carlo BER sweeps from a config file")
    p.add_argument("config")
    p.add_argument("-o", "--outdir", default=None, help="override [output] directory")
    p.add_argument("--workers", type=int, default=None, help="override worker count")

    p = sub.add_parser("analytic", help="evaluate a closed-form curve from a config file")
    p.add_argument("config")
    p.add_argument("-o", "--outdir", default=None, help="override [output] directory")

    p = sub.add_parser("compare", help="compare two sweep/analytic CSVs row by row")
    p.add_argument("csv_a")
    p.add_argument("csv_b")
    p.add_argument("--rel", type=float, default=None, help="relative tolerance")
    p.add_argument("--abs", dest="abs_tol", type=float, default=None, help="absolute tolerance")
    p.add_argument("--sigma", type=float, default=None,
                   help="tolerance in combined standard errors")
    p.add_argument("--rule", choices=("tolerance", "b-ge-a"), default="tolerance",
                   help="b-ge-a checks the ordering b >= a instead of tolerances")

    p = sub.add_parser("selftest", help="run the acceptance suite")
    p.add_argument("--only", default=None,
                   help="comma-separated criterion numbers, e.g. 1,2,11")
    p.add_argument("--workers", type=int, default=None)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "sweep":
            return cmd_sweep(args.config, args.outdir, args.workers)
        if args.command == "analytic":
            return cmd_analytic(args.config, args.outdir)
        if args.command == "compare":
            return cmd_compare(args.csv_a, args.csv_b, args.rel, args.abs_tol,
                               args.sigma, args.rule)
        if args.command == "selftest":
            only = None
            if args.only:
                only = [int(tok) for tok in args.only.split(",") if tok]
            return cmd_selftest(only, args.workers)
        raise AssertionError(f"unhandled command {args.command}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ValueError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ConvergenceError as exc:
        print(f"convergence error: {exc} (estimate {exc.estimate}, bound {exc.error_bound})",
              file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
