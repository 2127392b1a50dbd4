"""Command-line front end: ``surge {analyze,train,oracle,sweep}``.

Configs are TOML (JSON accepted as a fallback).  Every key is validated
against the defaults below; unknown keys are rejected.  Outputs are plain
CSV/JSON with floats written at 17 significant digits, so repeated runs
with the same config and seed are byte-identical.

Exit codes: 0 success, 2 config error, 3 I/O error, 4 invariant failure.
"""
from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import math
import sys
import warnings
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import landscape, optimizer, partition_estimator as pe, quartic_oracle as qo
from .series_core import InvalidInputError, TargetSet

try:  # python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_INVARIANT = 0, 2, 3, 4

_ANALYSIS_DEFAULTS = {f.name: f.default for f in fields(pe.AnalysisConfig) if f.name not in ("seed", "threads")}

DEFAULTS = {
    "seed": 0,
    "objective": {
        # quadratic | quartic | double_well | tilted_double_well | gaussian | constant | mlp_regression
        "kind": "mlp_regression",
        "theta0": None,
        "dim": 1,
        "value": 1.0,
        # half-width of a box domain [-box, box]^dim for analytic objectives
        "box": None,
    },
    "model": {"hidden": [12, 10, 8]},
    "dataset": {"n_points": 64, "x_range": [-2.0, 2.0], "seed": 0},
    "analysis": dict(_ANALYSIS_DEFAULTS),
    "train": {
        "optimizer": "sgd",
        "eta": 0.05,
        "lambda": 1.0,
        "max_norm": None,
        "steps": 500,
        "weight_decay": 0.0,
        "analysis_path": None,
        "targets": None,
        # rerun the analysis every this many steps (0: once, at the start)
        "reanalyze_every": 0,
    },
    "sweep": {"lambdas": [0.0, 0.5, 1.0, 2.0]},
    "oracle": {
        "g": list(qo.DEFAULT_G_GRID),
        "series_order": qo.MAX_ORDER,
        "pade_m": 2,
        "pade_n": 3,
        "tolerance": 1e-13,
    },
}

# keys a config may give at top level as shorthand for the [train] table
_TRAIN_SHORTHAND = ("optimizer", "eta", "lambda", "max_norm", "steps")

_DEFAULT_THETA0 = {"quadratic": 1.0, "quartic": 1.0, "double_well": 1.5, "tilted_double_well": 1.3,
                   "gaussian": 1.0, "constant": 0.0}


class ConfigError(Exception):
    pass


# ----------------------------------------------------------------------------
# config

def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        name = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {name!r}")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"config key {name!r} must be a table")
            out[key] = _merge(base[key], val, name + ".")
        else:
            out[key] = val
    return out


def load_config(path) -> dict:
    """Parse TOML (or JSON) and merge it over the defaults."""
    cfg = copy.deepcopy(DEFAULTS)
    if path is None:
        return cfg
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    text = raw.decode("utf-8", errors="replace")
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as toml_exc:
        try:
            data = json.loads(text)
        except json.JSONDecodeError:
            raise ConfigError(f"config {path} is neither TOML nor JSON: {toml_exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a table")
    data = dict(data)
    shorthand = {k: data.pop(k) for k in _TRAIN_SHORTHAND if k in data}
    if shorthand:
        data.setdefault("train", {})
        if not isinstance(data["train"], dict):
            raise ConfigError("config key 'train' must be a table")
        data["train"] = {**data["train"], **shorthand}
    return _merge(cfg, data)


def apply_flags(cfg: dict, args) -> dict:
    cfg = copy.deepcopy(cfg)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if getattr(args, "lam", None) is not None:
        cfg["train"]["lambda"] = args.lam
    if getattr(args, "optimizer", None) is not None:
        cfg["train"]["optimizer"] = args.optimizer
    if getattr(args, "steps", None) is not None:
        cfg["train"]["steps"] = args.steps
    if getattr(args, "g", None) is not None:
        cfg["oracle"]["g"] = list(args.g)
    if getattr(args, "analysis", None) is not None:
        cfg["train"]["analysis_path"] = args.analysis
    return cfg


def _analysis_config(cfg) -> pe.AnalysisConfig:
    try:
        return pe.AnalysisConfig(**cfg["analysis"], seed=int(cfg["seed"]))
    except (TypeError, InvalidInputError) as exc:
        raise ConfigError(f"invalid [analysis] settings: {exc}") from exc


def build_objective(cfg):
    """(objective, theta0) described by the [objective] table."""
    o = cfg["objective"]
    kind = o["kind"]
    seed = int(cfg["seed"])
    try:
        if kind == "mlp_regression":
            d = cfg["dataset"]
            data = landscape.synthetic_1d_dataset(int(d["n_points"]), tuple(d["x_range"]), int(d["seed"]))
            model = landscape.MLP([1, *[int(h) for h in cfg["model"]["hidden"]], 1])
            obj = landscape.mse_objective(model, data)
            theta0 = model.init(seed) if o["theta0"] is None else np.asarray(o["theta0"], dtype=float)
        else:
            if kind in ("quadratic", "quartic", "double_well", "tilted_double_well"):
                obj = landscape.analytic_potential(kind)
            elif kind == "gaussian":
                obj = landscape.gaussian_objective(int(o["dim"]))
            elif kind == "constant":
                obj = landscape.constant_objective(float(o["value"]), int(o["dim"]))
            else:
                raise ConfigError(f"unknown objective kind {kind!r} (key 'objective.kind')")
            if o["box"] is not None:
                half = float(o["box"])
                if not half > 0:
                    raise ConfigError("objective.box must be positive")
                obj.bounds = (np.full(obj.dim, -half), np.full(obj.dim, half))
            t0 = _DEFAULT_THETA0[kind] if o["theta0"] is None else o["theta0"]
            theta0 = np.broadcast_to(np.asarray(t0, dtype=float), (obj.dim,)).copy()
    except InvalidInputError as exc:
        raise ConfigError(str(exc)) from exc
    if theta0.shape != (obj.dim,):
        raise ConfigError(f"objective.theta0 must have {obj.dim} entries")
    return obj, theta0


# ----------------------------------------------------------------------------
# output helpers

def _dump_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=True) + "\n"


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, np.generic):
        return x.item()
    return x


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


# ----------------------------------------------------------------------------
# subcommands

def cmd_analyze(cfg, out: Path) -> int:
    obj, theta0 = build_objective(cfg)
    acfg = _analysis_config(cfg)
    report = pe.analyze(obj, theta0, acfg)
    try:
        _write(out / "analysis.json", _dump_json(report.to_dict()))
    except OSError as exc:
        print(f"error: cannot write analysis: {exc}", file=sys.stderr)
        return EXIT_IO
    targets = ", ".join(f"{t:.6g}" for t in report.targets) or "none"
    print(f"L0 = {report.l0:.6g}; targets: {targets}")
    for d in report.diagnostics:
        print(f"  note: {d}")
    return EXIT_OK


def _load_targets(cfg, require: bool):
    """TargetSet from the config or an analysis file, or None to analyse."""
    t = cfg["train"]
    if t["targets"] is not None:
        try:
            return TargetSet(tuple(float(z) for z in t["targets"]), math.inf)
        except (InvalidInputError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid train.targets: {exc}") from exc
    path = t["analysis_path"]
    if path is None:
        if require:
            raise ConfigError("--require-analysis given but no analysis file configured (train.analysis_path)")
        return None
    try:
        d = json.loads(Path(path).read_text())
        return pe.AnalysisReport.from_dict(d).targets
    except OSError as exc:
        if require:
            raise ConfigError(f"analysis file {path} is missing: {exc}") from exc
        print(f"warning: analysis file {path} unreadable, running the analysis instead", file=sys.stderr)
        return None
    except (ValueError, KeyError, TypeError, InvalidInputError) as exc:
        raise ConfigError(f"analysis file {path} is malformed: {exc}") from exc


def _base(cfg):
    t = cfg["train"]
    if t["optimizer"] not in ("sgd", "adam", "adamw"):
        raise ConfigError(f"unknown optimizer {t['optimizer']!r} (key 'train.optimizer')")
    try:
        eta = float(t["eta"])
        wd = float(t["weight_decay"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid [train] numbers: {exc}") from exc
    if not eta > 0:
        raise ConfigError("train.eta must be positive")
    return optimizer.make_base(t["optimizer"], eta, weight_decay=wd)


def _run_pair(cfg, obj, theta0, targets, lam):
    t = cfg["train"]
    steps = int(t["steps"])
    if steps < 1:
        raise ConfigError("train.steps must be positive")
    max_norm = None if t["max_norm"] is None else float(t["max_norm"])
    acfg = _analysis_config(cfg)
    bare = optimizer.train(obj, theta0, steps, _base(cfg), max_norm=max_norm, guided=False)
    surge = optimizer.train(obj, theta0, steps, _base(cfg), lam=lam, max_norm=max_norm,
                            targets=targets, analysis_config=acfg,
                            reanalyze_every=int(t["reanalyze_every"]))
    return bare, surge


def _improvement(bare, surge) -> float:
    fb, fs = bare.final_loss, surge.final_loss
    if fb == fs:
        return 0.0
    return 100.0 * (fb - fs) / fb if fb != 0 else float("nan")


def cmd_train(cfg, out: Path, require_analysis: bool = False) -> int:
    obj, theta0 = build_objective(cfg)
    targets = _load_targets(cfg, require_analysis)
    if targets is None:
        report = pe.analyze(obj, theta0, _analysis_config(cfg))
        targets = report.targets
        for d in report.diagnostics:
            print(f"  note: {d}")
    lam = float(cfg["train"]["lambda"])
    bare, surge = _run_pair(cfg, obj, theta0, targets, lam)
    summary = {
        "final_loss_bare": bare.final_loss,
        "final_loss_surge": surge.final_loss,
        "improvement_pct": _improvement(bare, surge),
        "targets": list(targets.targets),
        "lambda": lam,
        "seed": int(cfg["seed"]),
    }
    try:
        out.mkdir(parents=True, exist_ok=True)
        bare.to_csv(out / "bare.csv")
        surge.to_csv(out / "surge.csv")
        _write(out / "summary.json", _dump_json(summary))
    except OSError as exc:
        print(f"error: cannot write outputs: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"final loss: bare {bare.final_loss:.6g}, surge {surge.final_loss:.6g} "
          f"({summary['improvement_pct']:+.3g}%)")
    return EXIT_OK


def cmd_sweep(cfg, out: Path, require_analysis: bool = False) -> int:
    """Final losses for each lambda in sweep.lambdas, one shared analysis."""
    obj, theta0 = build_objective(cfg)
    targets = _load_targets(cfg, require_analysis)
    if targets is None:
        targets = pe.analyze(obj, theta0, _analysis_config(cfg)).targets
    rows = []
    for lam in cfg["sweep"]["lambdas"]:
        bare, surge = _run_pair(cfg, obj, theta0, targets, float(lam))
        rows.append((float(lam), bare.final_loss, surge.final_loss, _improvement(bare, surge)))
    try:
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "sweep.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["lambda", "final_loss_bare", "final_loss_surge", "improvement_pct"])
            for r in rows:
                w.writerow([format(v, ".17g") for v in r])
    except OSError as exc:
        print(f"error: cannot write sweep: {exc}", file=sys.stderr)
        return EXIT_IO
    for r in rows:
        print(f"lambda {r[0]:g}: bare {r[1]:.6g} surge {r[2]:.6g} ({r[3]:+.3g}%)")
    return EXIT_OK


def _coeff_cache(out: Path, k_max: int):
    """Oracle coefficients, cached in `out` behind a checksum.

    A missing, unreadable or tampered cache is rebuilt.
    """
    path = out / "quartic_coeffs.json"
    try:
        d = json.loads(path.read_text())
        coeffs = [float(x) for x in d["coeffs"]]
        digest = hashlib.sha256(json.dumps(coeffs).encode()).hexdigest()
        if d["k_max"] == k_max and len(coeffs) == k_max + 1 and d["sha256"] == digest:
            return coeffs, False
    except (OSError, ValueError, KeyError, TypeError):
        pass
    coeffs = qo.quartic_asymptotic_coeffs(k_max)
    digest = hashlib.sha256(json.dumps(coeffs).encode()).hexdigest()
    _write(path, _dump_json({"k_max": k_max, "coeffs": coeffs, "sha256": digest}))
    return coeffs, True


def cmd_oracle(cfg, out: Path) -> int:
    o = cfg["oracle"]
    try:
        k_max = int(o["series_order"])
        gs = [float(g) for g in o["g"]]
        tol = float(o["tolerance"])
        orders = (int(o["pade_m"]), int(o["pade_n"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid [oracle] settings: {exc}") from exc
    try:
        coeffs, rebuilt = _coeff_cache(out, k_max)
    except InvalidInputError as exc:
        raise ConfigError(f"oracle.series_order: {exc}") from exc
    except OSError as exc:
        print(f"error: cannot write coefficient cache: {exc}", file=sys.stderr)
        return EXIT_IO
    if rebuilt:
        print("  note: coefficient cache rebuilt")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            report = qo.verify_resummation(gs, k_max, orders, tolerance=tol, coeffs=coeffs)
        except InvalidInputError as exc:
            raise ConfigError(str(exc)) from exc
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    checks = qo.check_invariants(tol)
    try:
        report.to_csv(out / "oracle.csv")
        payload = report.to_dict()
        payload["invariants"] = {k: {"passed": bool(p), "detail": d} for k, (p, d) in checks.items()}
        _write(out / "oracle.json", _dump_json(payload))
    except OSError as exc:
        print(f"error: cannot write oracle report: {exc}", file=sys.stderr)
        return EXIT_IO
    print(report.format_table())
    failed = False
    for name, (passed, detail) in checks.items():
        print(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
        failed |= not passed
    return EXIT_INVARIANT if failed else EXIT_OK


# ----------------------------------------------------------------------------

def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML or JSON config file")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", default="surge_out", help="output directory")
    common.add_argument("--dump-defaults", action="store_true", help="print the default config and exit")

    train_flags = argparse.ArgumentParser(add_help=False)
    train_flags.add_argument("--lambda", dest="lam", type=float)
    train_flags.add_argument("--optimizer", choices=("sgd", "adam", "adamw"))
    train_flags.add_argument("--steps", type=int)
    train_flags.add_argument("--analysis", help="precomputed analysis JSON")
    train_flags.add_argument("--require-analysis", action="store_true",
                             help="fail unless a readable analysis file is given")

    p = argparse.ArgumentParser(prog="surge", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("analyze", parents=[common], help="locate targets at the initial parameters")
    sub.add_parser("train", parents=[common, train_flags], help="bare vs guided training")
    sub.add_parser("sweep", parents=[common, train_flags], help="guided training over several lambdas")
    po = sub.add_parser("oracle", parents=[common], help="quartic and Euler ground-truth checks")
    po.add_argument("--g", type=float, nargs="+", help="couplings for the report rows")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.dump_defaults:
        sys.stdout.write(_dump_json(DEFAULTS))
        return EXIT_OK
    try:
        cfg = apply_flags(load_config(args.config), args)
        out = Path(args.out)
        if args.command == "analyze":
            return cmd_analyze(cfg, out)
        if args.command == "train":
            return cmd_train(cfg, out, args.require_analysis)
        if args.command == "sweep":
            return cmd_sweep(cfg, out, args.require_analysis)
        return cmd_oracle(cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
