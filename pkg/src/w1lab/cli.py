"""Command-line front end: ``w1lab <subcommand> [options]``.

Every option can also come from a TOML file passed with ``--config``; keys
are the long option names with dashes replaced by underscores, either at top
level or in a table named after the subcommand.  Flags given on the command
line win.  The merged settings are checked against a JSON schema (printed by
``w1lab schema``) before anything is computed.

Exit codes: 0 ok, 2 input error, 3 no rate prediction, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from typing import Optional

import jsonschema
import numpy as np
import tomli

from . import __version__
from ._quad import DivergentIntegral
from .bounds import NoPrediction, predicted_rate
from .distributions import Exponential, Observable, Pareto, PointMass, TabulatedLaw, Uniform
from .dynamics import GpmMap, ProcessSpec, bates_law, export_trajectory, simulate_series
from .montecarlo import (ExperimentPlan, KernelTooNoisy, covariance_kernel, ks_distance, regress_rate,
                         resolve_reference, run_experiment, simulate_limit_law)
from .transfer_operator import UlamOperator, alpha1, alpha2, build_ulam
from .transport import ebralidze_majorant, wr_vs_law

EXIT_OK, EXIT_INPUT, EXIT_NO_PREDICTION, EXIT_NUMERICAL = 0, 2, 3, 4
MIN_BINS = 16


class InputError(ValueError):
    pass


# ---------------------------------------------------------------------------
# schema

_INT_LIST = {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1}
_COMMON = {
    "config": {"type": ["string", "null"]},
    "out": {"type": "string"},
    "seed": {"type": "integer", "minimum": 0},
    "threads": {"type": "integer", "minimum": 1},
}
_PROCESS = {
    "process": {"type": "string", "pattern": r"^(iid|doubling|lsv:[0-9.eE+-]+|mdep:[0-9]+)$"},
    "observable": {"type": "string", "pattern": r"^(identity|(zero|one):[0-9.eE+-]+(,[0-9.eE+-]+)?)$"},
    "law": {"type": "string"},
    "burn_in": {"type": "integer", "minimum": 0},
}
_FIELDS = {
    "distance": {
        "sample": {"type": "string"},
        "law": {"type": "string"},
        "r": {"type": "number", "minimum": 1},
        "majorant": {"type": "boolean"},
    },
    "simulate": {**_PROCESS, "n": {"type": "integer", "minimum": 1}},
    "rates": {
        "gamma": {"type": "number", "minimum": 0},
        "b": {"type": "number", "minimum": 0},
        "side": {"enum": ["zero", "one"]},
        "statistic": {"enum": ["mean_w1", "l2_w1", "mean", "l2"]},
        "n_grid": _INT_LIST,
        "replicas": {"type": "integer", "minimum": 2},
        "tol": {"type": "number", "exclusiveMinimum": 0},
        "law": {"type": "string"},
        "burn_in": {"type": "integer", "minimum": 0},
        "log_correction": {"enum": ["none", "fit"]},
    },
    "alpha": {
        "map": {"type": "string", "pattern": r"^(iid|doubling|lsv:[0-9.eE+-]+)$"},
        "m": {"type": "integer"},
        "lags": _INT_LIST,
        "mesh": {"enum": ["uniform", "graded", None]},
        "pair": {"type": "boolean"},
    },
    "clt": {
        **_PROCESS,
        "n": {"type": "integer", "minimum": 1},
        "replicas": {"type": "integer", "minimum": 2},
        "grid": {"type": "integer", "minimum": 2},
        "lag_cutoff": {"type": ["integer", "null"], "minimum": 0},
        "kernel_length": {"type": "integer", "minimum": 100},
        "threshold": {"type": "number", "exclusiveMinimum": 0},
    },
}
_REQUIRED = {"distance": ["sample", "law"], "simulate": ["process", "n"], "rates": ["gamma", "n_grid"],
             "alpha": ["map"], "clt": ["process", "n"]}


def config_schema(command: str) -> dict:
    return {
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "title": f"w1lab {command} settings",
        "type": "object",
        "properties": {**_COMMON, **_FIELDS[command]},
        "required": _REQUIRED[command],
        "additionalProperties": False,
    }


_DEFAULTS = {
    "common": {"out": ".", "seed": 0, "threads": 1},
    "distance": {"r": 1.0, "majorant": False},
    "simulate": {"observable": "identity", "law": "uniform", "burn_in": 10_000},
    "rates": {"b": 0.0, "side": "zero", "statistic": "mean_w1", "replicas": 100, "tol": 0.05,
              "law": "uniform", "burn_in": 10_000, "log_correction": "none"},
    "alpha": {"m": 1 << 12, "lags": [1, 2, 4, 8, 16, 32, 64, 128, 256], "mesh": None, "pair": False},
    "clt": {"observable": "identity", "law": "uniform", "burn_in": 10_000, "replicas": 1000, "grid": 256,
            "lag_cutoff": None, "kernel_length": 1_000_000, "threshold": 0.05},
}


# ---------------------------------------------------------------------------
# parsing helpers


def _numbers(text: str, what: str) -> list:
    try:
        return [float(v) for v in text.split(",")] if text else []
    except ValueError:
        raise InputError(f"invalid {what}: {text!r}") from None


def parse_law(spec: str):
    """uniform[:a,b] | exponential[:rate] | pareto:index[,scale] | point:c | bates:k | table:path."""
    name, _, arg = spec.partition(":")
    name = name.strip().lower()
    try:
        if name == "table":
            return TabulatedLaw.from_csv(arg)
        vals = _numbers(arg, "law parameters")
        if name == "uniform":
            return Uniform(*vals) if vals else Uniform()
        if name == "exponential":
            return Exponential(*vals)
        if name == "pareto" and vals:
            return Pareto(*vals)
        if name == "point" and len(vals) == 1:
            return PointMass(vals[0])
        if name == "bates" and len(vals) == 1:
            return bates_law(int(vals[0]))
    except (TypeError, ValueError, OSError) as exc:
        raise InputError(f"invalid law {spec!r}: {exc}") from None
    raise InputError(f"invalid law {spec!r}")


def parse_observable(spec: str) -> Observable:
    if spec == "identity":
        return Observable("identity")
    side, _, arg = spec.partition(":")
    vals = _numbers(arg, "observable")
    if side not in ("zero", "one") or not 1 <= len(vals) <= 2:
        raise InputError(f"invalid observable {spec!r}")
    try:
        return Observable("singular_" + side, exponent=vals[0], scale=vals[1] if len(vals) > 1 else 1.0)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def parse_process(cfg: dict) -> ProcessSpec:
    name, _, arg = cfg["process"].partition(":")
    seed, burn = int(cfg["seed"]), int(cfg["burn_in"])
    try:
        if name == "iid":
            return ProcessSpec("iid", law=parse_law(cfg["law"]), seed=seed)
        if name == "mdep":
            return ProcessSpec("mdep", m=int(arg), seed=seed)
        g = parse_observable(cfg["observable"])
        if name == "lsv":
            return ProcessSpec("lsv", gamma=float(arg), observable=g, burn_in=burn, seed=seed)
        if name == "doubling":
            return ProcessSpec("gpm", gpm_map=GpmMap.doubling(), observable=g, burn_in=burn, seed=seed)
    except ValueError as exc:
        raise InputError(f"invalid process: {exc}") from None
    raise InputError(f"invalid process {cfg['process']!r}")


def read_sample(path: str) -> np.ndarray:
    """One-column CSV of reals; a non-numeric first line is taken as a header."""
    values = []
    try:
        with open(path, newline="") as fh:
            for lineno, row in enumerate(csv.reader(fh), start=1):
                cells = [c.strip() for c in row]
                if not cells or cells == [""]:
                    continue
                if len(cells) != 1:
                    raise InputError(f"{path}:{lineno}: expected one column, got {len(cells)}")
                try:
                    v = float(cells[0])
                except ValueError:
                    if lineno == 1 and not values:
                        continue
                    raise InputError(f"{path}:{lineno}: not a number: {cells[0]!r}") from None
                if not math.isfinite(v):
                    raise InputError(f"{path}:{lineno}: value is not finite")
                values.append(v)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    if not values:
        raise InputError(f"{path}: sample is empty")
    return np.array(values)


def _round(obj):
    """Round floats to 12 significant digits for stable, diffable output."""
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return float(f"{v:.12g}") if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _emit(payload: dict, path: Optional[str] = None) -> None:
    text = json.dumps(_round({**payload, "version": __version__}), sort_keys=True)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    print(text)


def _out_path(cfg: dict, name: str) -> str:
    out = cfg["out"]
    if out.endswith((".csv", ".json")):
        d = os.path.dirname(out)
        if d:
            os.makedirs(d, exist_ok=True)
        return out if out.endswith(os.path.splitext(name)[1]) else os.path.splitext(out)[0] + os.path.splitext(name)[1]
    os.makedirs(out, exist_ok=True)
    return os.path.join(out, name)


def _fit_slope(x, y) -> Optional[float]:
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    keep = y > 0
    if keep.sum() < 2:
        return None
    return float(np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)[0])


# ---------------------------------------------------------------------------
# subcommands


def cmd_distance(cfg: dict) -> int:
    sample = read_sample(cfg["sample"])
    law = parse_law(cfg["law"])
    r = float(cfg["r"])
    if not law.has_moment(r):
        raise InputError(f"the law has no finite moment of order {r:g}")
    cost = wr_vs_law(sample, law, r)
    out = {"w": cost ** (1.0 / r), "r": r, "n": int(sample.size)}
    if cfg["majorant"]:
        # bounds w ** r
        out["majorant"] = ebralidze_majorant(sample, law, r)
    _emit(out)
    return EXIT_OK


def cmd_simulate(cfg: dict) -> int:
    spec = parse_process(cfg)
    series = simulate_series(spec, int(cfg["n"]))
    path = _out_path(cfg, "trajectory.csv")
    export_trajectory(path, series, spec)
    _emit({"file": path, "n": int(series.size), "spec_hash": spec.spec_hash(), "process": spec.describe()})
    return EXIT_OK


def rates_process(cfg: dict) -> ProcessSpec:
    """iid when gamma = 0 (g(U) has a Pareto(1/b) law), LSV otherwise."""
    gamma, b, side = float(cfg["gamma"]), float(cfg["b"]), cfg["side"]
    seed = int(cfg["seed"])
    if gamma == 0:
        law = Pareto(1.0 / b) if b > 0 else parse_law(cfg["law"])
        return ProcessSpec("iid", law=law, seed=seed)
    g = Observable("singular_" + side, exponent=b) if b > 0 else Observable("identity")
    return ProcessSpec("lsv", gamma=gamma, observable=g, burn_in=int(cfg["burn_in"]), seed=seed)


def cmd_rates(cfg: dict) -> int:
    gamma, b, side = float(cfg["gamma"]), float(cfg["b"]), cfg["side"]
    stat = {"mean_w1": "mean", "l2_w1": "l2"}.get(cfg["statistic"], cfg["statistic"])
    pred = predicted_rate(gamma, b, side, stat)  # raises NoPrediction first
    plan = ExperimentPlan(rates_process(cfg), tuple(cfg["n_grid"]), int(cfg["replicas"]), seed=int(cfg["seed"]),
                          workers=int(cfg["threads"]))
    result = run_experiment(plan)
    fit = regress_rate(result, stat, log_correction=cfg["log_correction"])
    result.to_csv(_out_path(cfg, "rates.csv"))
    verdict = {
        "plan_hash": result.plan_hash,
        "predicted_exponent": pred.exponent,
        "predicted_log_power": pred.log_power,
        "regime": pred.regime,
        "fitted_slope": fit["slope"],
        "stderr": fit["stderr"],
        "r2": fit["r2"],
        "tol": float(cfg["tol"]),
        "pass": abs(fit["slope"] - pred.exponent) <= float(cfg["tol"]),
        "summary": result.summary(),
    }
    _emit(verdict, _out_path(cfg, "rates.json"))
    return EXIT_OK


def _alpha_operator(cfg: dict) -> tuple:
    m = int(cfg["m"])
    if m < MIN_BINS:
        raise InputError(f"m must be at least {MIN_BINS}")
    name, _, arg = cfg["map"].partition(":")
    if name == "iid":
        # every row uniform: the chain forgets its state in one step
        return UlamOperator.from_matrix(np.full((m, m), 1.0 / m)), m
    if name == "doubling":
        return build_ulam(GpmMap.doubling(), m, mesh=cfg["mesh"] or "uniform"), m
    try:
        from .dynamics import LsvMap
        tmap = LsvMap(float(arg))
    except ValueError as exc:
        raise InputError(str(exc)) from None
    return build_ulam(tmap, m, mesh=cfg["mesh"] or "graded"), m


def cmd_alpha(cfg: dict) -> int:
    op, m = _alpha_operator(cfg)
    lags = np.asarray(cfg["lags"], dtype=int)
    a1 = alpha1(op, None, lags)
    a2 = alpha2(op, None, lags) if cfg["pair"] else None
    path = _out_path(cfg, "alpha.csv")
    with open(path, "w") as fh:
        fh.write("lag,alpha1,alpha2\n")
        for i, k in enumerate(lags):
            v2 = f"{a2.values[i]:.12g}" if a2 is not None else ""
            fh.write(f"{k},{a1.values[i]:.12g},{v2}\n")
    _emit({"file": path, "map": cfg["map"], "m": m, "lags": lags.tolist(), "alpha1": a1.values.tolist(),
           "alpha2": a2.values.tolist() if a2 is not None else None, "slope": _fit_slope(lags, a1.values)})
    return EXIT_OK


def _kernel_grid(law, G: int) -> tuple:
    lo, hi = law.lower, law.upper
    if not math.isfinite(lo):
        lo = float(law.ppf(1e-4))
    if not math.isfinite(hi):
        hi = float(law.ppf(1.0 - 1e-4))
    if hi <= lo:
        return None, None
    edges = np.linspace(lo, hi, G + 1)
    return 0.5 * (edges[:-1] + edges[1:]), np.diff(edges)


def cmd_clt(cfg: dict) -> int:
    spec = parse_process(cfg)
    n = int(cfg["n"])
    plan = ExperimentPlan(spec, (n,), int(cfg["replicas"]), seed=int(cfg["seed"]), workers=int(cfg["threads"]),
                          bootstrap=0)
    law, _ = resolve_reference(plan)
    result = run_experiment(plan, law)
    scaled = math.sqrt(n) * result.raw[n]
    grid, widths = _kernel_grid(law, int(cfg["grid"]))
    L = cfg["lag_cutoff"]
    if L is None:
        L = 0 if spec.kind == "iid" else spec.m if spec.kind == "mdep" else 200
    if grid is None:
        limit = np.zeros(scaled.size)
    else:
        K = covariance_kernel(spec, grid, int(L), int(cfg["kernel_length"]))
        limit = simulate_limit_law(K, widths, scaled.size, seed=int(cfg["seed"]))
    ks = ks_distance(scaled, limit)
    payload = {"plan_hash": result.plan_hash, "n": n, "replicas": int(scaled.size), "lag_cutoff": int(L),
               "ks": ks, "threshold": float(cfg["threshold"]), "pass": ks < float(cfg["threshold"]),
               "mean_scaled_w1": float(np.mean(scaled)), "mean_limit": float(np.mean(limit))}
    if grid is None:
        payload["degenerate"] = True
    _emit(payload, _out_path(cfg, "clt.json"))
    return EXIT_OK


COMMANDS = {"distance": cmd_distance, "simulate": cmd_simulate, "rates": cmd_rates, "alpha": cmd_alpha,
            "clt": cmd_clt}


# ---------------------------------------------------------------------------
# argument handling


def _list_arg(text: str) -> list:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="w1lab", description="Wasserstein convergence laboratory.")
    parser.add_argument("--version", action="version", version=f"w1lab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_):
        p = sub.add_parser(name, help=help_, argument_default=argparse.SUPPRESS)
        p.add_argument("--config", help="TOML settings file")
        p.add_argument("--out", help="output directory (or file)")
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int)
        return p

    def process_args(p):
        p.add_argument("--process", help="iid | mdep:M | lsv:GAMMA | doubling")
        p.add_argument("--observable", help="identity | zero:b[,C] | one:b[,C]")
        p.add_argument("--law", help="law of iid processes, e.g. uniform, pareto:3")
        p.add_argument("--burn-in", type=int)

    p = add("distance", "W_r between a sample file and a reference law")
    p.add_argument("--sample")
    p.add_argument("--law")
    p.add_argument("-r", "--r", type=float)
    p.add_argument("--majorant", action="store_true")

    p = add("simulate", "write a trajectory CSV")
    process_args(p)
    p.add_argument("-n", "--n", type=int)

    p = add("rates", "fit the decay rate of a W1 moment and compare with the prediction")
    p.add_argument("--gamma", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--side", choices=["zero", "one"])
    p.add_argument("--statistic")
    p.add_argument("--n-grid", type=_list_arg)
    p.add_argument("--replicas", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--law")
    p.add_argument("--burn-in", type=int)
    p.add_argument("--log-correction", choices=["none", "fit"])

    p = add("alpha", "Ulam estimates of the dependence coefficients")
    p.add_argument("--map", help="iid | doubling | lsv:GAMMA")
    p.add_argument("-m", "--m", type=int)
    p.add_argument("--lags", type=_list_arg)
    p.add_argument("--mesh", choices=["uniform", "graded"])
    p.add_argument("--pair", action="store_true", help="also compute the two-indicator coefficient")

    p = add("clt", "compare sqrt(n) W1 with the Gaussian limit functional")
    process_args(p)
    p.add_argument("-n", "--n", type=int)
    p.add_argument("--replicas", type=int)
    p.add_argument("--grid", type=int)
    p.add_argument("--lag-cutoff", type=int)
    p.add_argument("--kernel-length", type=int)
    p.add_argument("--threshold", type=float)

    s = sub.add_parser("schema", help="print the JSON schema of a subcommand's settings")
    s.add_argument("name", choices=sorted(COMMANDS))
    return parser


def load_settings(command: str, flags: dict) -> dict:
    """Defaults, then the config file, then command-line flags; validated."""
    cfg = {**_DEFAULTS["common"], **_DEFAULTS[command]}
    path = flags.get("config")
    if path:
        try:
            with open(path, "rb") as fh:
                data = tomli.load(fh)
        except (OSError, tomli.TOMLDecodeError) as exc:
            raise InputError(f"cannot read config {path}: {exc}") from None
        section = data.pop(command, {})
        for other in COMMANDS:
            data.pop(other, None)
        cfg.update(data)
        cfg.update(section)
    cfg.update(flags)
    try:
        jsonschema.validate(cfg, config_schema(command))
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "settings"
        raise InputError(f"invalid {where}: {exc.message}") from None
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command == "schema":
        print(json.dumps(config_schema(args.name), indent=2, sort_keys=True))
        return EXIT_OK
    flags = {k: v for k, v in vars(args).items() if k != "command"}
    try:
        cfg = load_settings(args.command, flags)
        return COMMANDS[args.command](cfg)
    except NoPrediction as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_PREDICTION
    except (DivergentIntegral, KernelTooNoisy, RuntimeError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (InputError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
