"""Command-line front end: ``rmt-lab <subcommand> --config FILE --out DIR``.

Every subcommand reads a JSON config (``"schema": 1``), applies ``--set``
overrides (dotted keys, JSON values), validates the result against a
fail-closed schema and only then computes.  Errors end the process with a
nonzero exit code and one JSON line on stderr.

Exit codes: 0 ok, 1 check failed, 2 usage, 3 config, 4 numerical.
"""

from __future__ import annotations

import argparse
import copy
import datetime
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from . import wick
from .covariance import CovarianceFamily
from .errors import ConfigError, DegenerateVariance, NoConvergence, NotPSD, RmtLabError, UsageError
from .harness import ExperimentConfig, opnorm_scaling_scan, run_experiment, simulate_trials, worker_count
from .sampler import NoiseStream, SampleSpec, sample_matrix, write_matrix_csv

__all__ = ["main", "parse_and_validate", "dispatch", "Invocation", "SCHEMAS", "SUBCOMMANDS"]

SCHEMA_VERSION = 1
KINDS = ["toeplitz", "circulant", "reverse_circulant", "symmetric_circulant", "hankel"]

_FAMILY = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["wigner", "full", "constant_off_diagonal", "power_decay", "geometric_decay", "custom"]},
        "v": {"type": "number", "exclusiveMinimum": 0},
        "gamma": {"type": "number", "minimum": 0, "maximum": 1},
        "alpha": {"type": "number", "exclusiveMinimum": 0},
        "rho": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "matrices": {
            "type": "object",
            "patternProperties": {"^[0-9]+$": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}}},
            "additionalProperties": False,
        },
        "var_bounds": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
    },
    "additionalProperties": False,
}
_INT = {"type": "integer", "minimum": 1}
_SEED = {"type": "integer", "minimum": 0, "maximum": 2**64 - 1}
_COMMON = {
    "schema": {"const": SCHEMA_VERSION},
    "kind": {"enum": KINDS},
    "family": _FAMILY,
    "master_seed": _SEED,
}


def _schema(required, props):
    return {
        "type": "object",
        "required": ["schema", "kind", "family"] + required,
        "properties": {**_COMMON, **props},
        "additionalProperties": False,
    }


SCHEMAS = {
    "clt-scan": _schema(["n_list", "p", "trials"], {
        "n_list": {"type": "array", "items": _INT, "minItems": 1},
        "p": _INT,
        "trials": {"type": "integer", "minimum": 2},
        "bins": {"type": "integer", "minimum": 2},
        "bin_range": {"type": "number", "exclusiveMinimum": 0},
        "standardization": {"enum": ["auto", "exact", "empirical"]},
        "norm_trials": {"type": ["integer", "null"], "minimum": 0},
        "opnorm_moments": {"type": "array", "items": _INT},
        "with_bounds": {"type": "boolean"},
        "check": {"type": "boolean"},
    }),
    "bounds-report": _schema(["n", "p"], {
        "n": _INT,
        "p": _INT,
        "trials": {"type": "integer", "minimum": 2},
        "check": {"type": "boolean"},
    }),
    "oracle-check": _schema(["n", "p", "trials"], {
        "n": _INT,
        "p": _INT,
        "trials": {"type": "integer", "minimum": 2},
        "z_max": {"type": "number", "exclusiveMinimum": 0},
    }),
    "norm-scaling": _schema(["n_list", "trials"], {
        "n_list": {"type": "array", "items": _INT, "minItems": 1},
        "trials": {"type": "integer", "minimum": 2},
        "check": {"type": "boolean"},
    }),
    "sample-dump": _schema(["n"], {
        "n": _INT,
        "trial_index": {"type": "integer", "minimum": 0},
    }),
}
SUBCOMMANDS = tuple(SCHEMAS)


@dataclass
class Invocation:
    subcommand: str
    config: dict
    out_dir: Path
    stamp: bool = False
    config_path: Path = None
    overrides: list = field(default_factory=list)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser():
    ap = _Parser(prog="rmt-lab", description="Correlated patterned random matrix experiments.")
    sub = ap.add_subparsers(dest="subcommand", metavar="subcommand")
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, help="JSON config file")
        sp.add_argument("--out", type=Path, required=True, help="output directory")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config field; dotted keys, JSON values")
        sp.add_argument("--stamp", action="store_true", help="include timings and a timestamp")
    return ap


def _apply_override(cfg, item):
    key, sep, raw = item.partition("=")
    if not sep or not key:
        raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = cfg
    parts = key.split(".")
    for part in parts[:-1]:
        nxt = node.get(part)
        if nxt is None:
            nxt = node[part] = {}
        if not isinstance(nxt, dict):
            raise ConfigError(f"cannot set {key}: {part} is not an object", field=key)
        node = nxt
    node[parts[-1]] = value


def parse_and_validate(argv):
    """Parse arguments, load the config, apply overrides and validate."""
    args = _build_parser().parse_args(argv)
    if args.subcommand is None:
        raise UsageError("missing subcommand; choose from " + ", ".join(SUBCOMMANDS))
    if args.config is not None:
        try:
            cfg = json.loads(args.config.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {args.config}", field="config") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}", field="config") from None
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object", field="config")
    else:
        cfg = {"schema": SCHEMA_VERSION}
    cfg = copy.deepcopy(cfg)
    for item in args.set:
        _apply_override(cfg, item)
    errors = sorted(jsonschema.Draft202012Validator(SCHEMAS[args.subcommand]).iter_errors(cfg),
                    key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        where = ".".join(str(x) for x in err.absolute_path) or _missing_field(err) or "<root>"
        raise ConfigError(err.message, field=where)
    try:
        CovarianceFamily.from_dict(cfg["family"])
    except RmtLabError as exc:
        raise ConfigError(str(exc), field="family") from None
    out = args.out
    if out.exists() and not out.is_dir():
        raise ConfigError(f"output path {out} is not a directory", field="out")
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise ConfigError(f"output directory {out} is not writable", field="out")
    return Invocation(args.subcommand, cfg, out, args.stamp, args.config, list(args.set))


def _missing_field(err):
    if err.validator == "required":
        return err.message.split("'")[1] if "'" in err.message else None
    if err.validator == "additionalProperties":
        return err.message.split("'")[1] if "'" in err.message else None
    return None


# ---------------------------------------------------------------------------
# pipelines


def _write_json(path, payload, inv):
    if inv.stamp:
        payload = dict(payload, stamp=datetime.datetime.now(datetime.timezone.utc).isoformat())
    path.write_text(json.dumps(_clean(payload), indent=2, sort_keys=True) + "\n")


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def _spec(cfg, n=None):
    return SampleSpec(cfg["kind"], cfg["n"] if n is None else n, CovarianceFamily.from_dict(cfg["family"]))


def _clt_scan(inv):
    cfg = inv.config
    fields = {k: v for k, v in cfg.items() if k not in ("schema", "check")}
    rep = run_experiment(ExperimentConfig.from_dict(fields))
    (inv.out_dir / "report.json").write_text(rep.to_json(stamp=inv.stamp))
    (inv.out_dir / "report.csv").write_text(rep.to_csv())
    if not cfg.get("check", False):
        return 0
    ks = [r.ks for r in rep.records]
    ok = all(k is not None for k in ks) and all(b < a for a, b in zip(ks, ks[1:]))
    for r in rep.records:
        ok &= all(e.get("satisfied", True) is not False for e in r.bound_report.values())
    return 0 if ok else 1


def _bounds_report(inv):
    cfg = inv.config
    ec = ExperimentConfig(cfg["kind"], cfg["family"], (cfg["n"],), cfg["p"], cfg.get("trials", 2000),
                          master_seed=cfg.get("master_seed", 0))
    rec = run_experiment(ec).records[0]
    payload = {
        "kind": cfg["kind"], "family": cfg["family"], "n": cfg["n"], "p": cfg["p"],
        "trials": ec.trials, "seed": ec.master_seed,
        "exact_mean": rec.exact_mean, "exact_var": rec.exact_var,
        "sample_mean": rec.sample_mean, "sample_var": rec.sample_var,
        "sigma_param": rec.sigma_param, "nu_param": rec.nu_param,
        "mean_opnorm": rec.mean_opnorm,
        "bounds": rec.bound_report,
    }
    if inv.stamp:
        payload["wall_time"] = rec.wall_time
    _write_json(inv.out_dir / "bounds.json", payload, inv)
    if cfg.get("check", False):
        return 0 if all(e.get("satisfied", True) is not False for e in rec.bound_report.values()) else 1
    return 0


def _oracle_check(inv):
    cfg = inv.config
    spec = _spec(cfg)
    p, trials = cfg["p"], cfg["trials"]
    z_max = cfg.get("z_max", 5.0)
    exact = wick.exact_trace_moments(spec, p)
    seed = cfg.get("master_seed", 0)
    w, _ = simulate_trials(spec, p, seed, 0, trials, 0, worker_count())
    mean = float(np.mean(w))
    var = float(np.var(w, ddof=1))
    c = w - mean
    m4 = float(np.mean(c**4))
    se_mean = math.sqrt(var / trials)
    se_var = math.sqrt(max(m4 - var**2, 0.0) / trials)
    z_mean = (mean - exact.mean) / se_mean if se_mean > 0 else (0.0 if mean == exact.mean else math.inf)
    z_var = (var - exact.variance) / se_var if se_var > 0 else (0.0 if var == exact.variance else math.inf)
    ok = abs(z_mean) <= z_max and abs(z_var) <= z_max
    payload = {
        "kind": cfg["kind"], "family": cfg["family"], "n": spec.n, "p": p, "trials": trials,
        "seed": seed, "exact": exact.to_dict(),
        "sample_mean": mean, "sample_var": var, "se_mean": se_mean, "se_var": se_var,
        "z_mean": z_mean, "z_var": z_var, "z_max": z_max, "passed": ok,
    }
    _write_json(inv.out_dir / "oracle.json", payload, inv)
    return 0 if ok else 1


def _norm_scaling(inv):
    cfg = inv.config
    table = opnorm_scaling_scan(cfg["kind"], CovarianceFamily.from_dict(cfg["family"]), cfg["n_list"],
                                cfg["trials"], master_seed=cfg.get("master_seed", 0))
    _write_json(inv.out_dir / "norm_scaling.json", table.to_dict(), inv)
    lines = ["n,mean_opnorm,ratio,se"] + [f"{n},{m!r},{r!r},{se!r}" for n, m, r, se in table.rows]
    (inv.out_dir / "norm_scaling.csv").write_text("\n".join(lines) + "\n")
    if cfg.get("check", False) and table.trend_ok is False:
        return 1
    return 0


def _sample_dump(inv):
    cfg = inv.config
    spec = _spec(cfg)
    x = sample_matrix(spec, NoiseStream(cfg.get("master_seed", 0), cfg.get("trial_index", 0)))
    write_matrix_csv(x, inv.out_dir / "sample.csv")
    return 0


_DISPATCH = {
    "clt-scan": _clt_scan,
    "bounds-report": _bounds_report,
    "oracle-check": _oracle_check,
    "norm-scaling": _norm_scaling,
    "sample-dump": _sample_dump,
}


def dispatch(inv):
    """Run the pipeline for ``inv`` and return its exit code (0 or 1)."""
    return _DISPATCH[inv.subcommand](inv)


# ---------------------------------------------------------------------------
# entry point


def exit_code_for(exc):
    if isinstance(exc, UsageError):
        return 2
    if isinstance(exc, (NotPSD, NoConvergence, DegenerateVariance, ArithmeticError)):
        return 4
    if isinstance(exc, RmtLabError):
        return 3
    return 4 if isinstance(exc, (FloatingPointError, np.linalg.LinAlgError)) else 3


def _diagnose(exc, code):
    line = {"error": type(exc).__name__, "exit": code, "message": str(exc).replace("\n", " ")}
    fld = getattr(exc, "field", None)
    if fld is not None:
        line["field"] = fld
    print(json.dumps(line, sort_keys=True), file=sys.stderr)


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        inv = parse_and_validate(argv)
        return dispatch(inv)
    except (RmtLabError, ArithmeticError, np.linalg.LinAlgError) as exc:
        code = exit_code_for(exc)
        _diagnose(exc, code)
        return code


if __name__ == "__main__":
    sys.exit(main())
