"""Command-line front end: config-driven steady, evolve, sweep and spectrum runs.

Exit codes: 0 success, 1 output I/O failure, 2 configuration error,
3 no steady state, 4 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from pathlib import Path

import jsonschema
import numpy as np
import yaml

from . import __version__
from .gaussian_core import toeplitz_mode_frequencies
from .model import build_generators
from .scenarios import (PRESET_NAMES, fourier_crossover_scan, preset, run_evolve, run_steady,
                        size_scan, smc_mode_frequencies)
from .steady import NoSteadyStateError, SolverError, stability_check

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_NO_STEADY, EXIT_SOLVER = 0, 1, 2, 3, 4
MODES = ("steady", "evolve", "sweep", "spectrum")
RATE_KEYS = ("zeta", "zeta_end", "zeta_A", "zeta_B", "nbar", "nbar_A", "nbar_B", "gamma")

_NUM = {"type": "number"}
_SITE_MAP = {"type": "object", "patternProperties": {"^-?[0-9]+$": _NUM}, "additionalProperties": False}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["scenario"],
    "properties": {
        "scenario": {"enum": list(PRESET_NAMES)},
        "mode": {"enum": list(MODES)},
        "params": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n": {"type": "integer", "minimum": 2},
                "omega": _NUM, "Omega": _NUM, "kappa": _NUM, "hbar": _NUM,
                "couplings": {"type": "array", "items": _NUM},
                "zeta": {"anyOf": [_NUM, {"const": "ends"}]},
                "zeta_end": _NUM, "nbar": _NUM, "zeta_A": _NUM, "nbar_A": _NUM,
                "zeta_B": _NUM, "nbar_B": _NUM,
                "gamma": {"anyOf": [_NUM, {"type": "array", "items": _NUM}]},
                "nbar_sites": _SITE_MAP, "zeta_sites": _SITE_MAP,
                "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
            },
        },
        "times": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
        "dt": {"type": "number", "exclusiveMinimum": 0},
        "solver": {"enum": ["auto", "spectral", "vectorized", "krylov", "schur"]},
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind", "ns"],
            "properties": {
                "kind": {"enum": ["fourier", "size"]},
                "ns": {"type": "array", "items": {"type": "integer", "minimum": 3}, "minItems": 1},
                "gamma": _NUM, "N1": _NUM, "Nn": _NUM,
            },
        },
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "tolerances": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"residual": {"type": "number", "exclusiveMinimum": 0}},
        },
    },
}


class ConfigError(ValueError):
    pass


# config handling ----------------------------------------------------------

def load_config(path) -> dict:
    """Read a YAML or JSON config.  A previous JSON report is accepted too:
    its ``config`` block is used, which reproduces that run."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML/JSON: {exc}") from exc
    if isinstance(doc, dict) and "config" in doc and "provenance" in doc:
        doc = doc["config"]
    if not isinstance(doc, dict):
        raise ConfigError("config must be a mapping")
    return doc


def schema_errors(cfg) -> list[str]:
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    out = []
    for err in sorted(validator.iter_errors(cfg), key=lambda e: list(e.path)):
        where = ".".join(str(p) for p in err.path) or "<root>"
        out.append(f"{where}: {err.message}")
    return out


def physics_errors(cfg) -> list[str]:
    params = cfg.get("params", {}) or {}
    out = []
    for key in RATE_KEYS:
        vals = np.atleast_1d(params.get(key, 0.0)) if not isinstance(params.get(key), str) else []
        if any(float(v) < 0 for v in vals):
            out.append(f"params.{key}: must be non-negative, got {params[key]!r}")
    for key in ("nbar_sites", "zeta_sites"):
        for site, v in (params.get(key) or {}).items():
            if float(v) < 0:
                out.append(f"params.{key}.{site}: must be non-negative, got {v!r}")
    for key in ("omega", "hbar"):
        if key in params and not float(params[key]) > 0:
            out.append(f"params.{key}: must be positive, got {params[key]!r}")
    if any(float(c) <= 0 for c in params.get("couplings", ())):
        out.append("params.couplings: couplings must be positive")
    return out


def resolve_config(cfg: dict, mode: str | None, seed: int | None) -> dict:
    """Validate and fill defaults; the result is the reproducible run record."""
    cfg = json.loads(json.dumps(cfg))  # detach and normalise keys to strings
    errs = schema_errors(cfg)
    if errs:
        raise ConfigError("; ".join(errs))
    if mode is not None:
        if cfg.get("mode", mode) != mode:
            raise ConfigError(f"config mode {cfg['mode']!r} does not match command {mode!r}")
        cfg["mode"] = mode
    cfg.setdefault("mode", "steady")
    if seed is not None:
        cfg["seed"] = seed
    cfg.setdefault("seed", 0)
    cfg.setdefault("params", {})
    if cfg["scenario"] == "caseV":
        cfg["params"].setdefault("seed", cfg["seed"])
    cfg.setdefault("solver", "auto")
    if cfg["mode"] == "evolve" and "times" not in cfg:
        raise ConfigError("evolve mode needs a 'times' grid")
    if cfg["mode"] == "sweep" and "sweep" not in cfg:
        raise ConfigError("sweep mode needs a 'sweep' block")
    errs = physics_errors(cfg)
    if errs:
        raise ConfigError("; ".join(errs))
    try:
        build_preset(cfg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def build_preset(cfg):
    return preset(cfg["scenario"], **cfg.get("params", {}))


# tables and writers -------------------------------------------------------

def _fmt(v):
    if isinstance(v, str):
        return v
    return "%.17g" % v


def _table(columns, rows):
    rows = [[v if isinstance(v, str) else float(v) for v in r] for r in rows]
    for r in rows:
        for v in r:
            if not isinstance(v, str) and not np.isfinite(v):
                raise SolverError(f"non-finite value in output table ({columns})")
    return {"columns": list(columns), "rows": rows}


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table["columns"])
    for r in table["rows"]:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def write_outputs(out: Path, tables: dict, report: dict, fmt: str) -> list[Path]:
    written = []
    if fmt in ("csv", "both"):
        for name, table in tables.items():
            p = out / f"{name}.csv"
            _atomic_write(p, _csv_text(table))
            written.append(p)
    if fmt in ("json", "both"):
        p = out / "report.json"
        _atomic_write(p, json.dumps({**report, "tables": tables}, indent=2) + "\n")
        written.append(p)
    return written


# modes --------------------------------------------------------------------

def _run_steady(cfg):
    p = build_preset(cfg)
    rep = run_steady(p, cfg["solver"])
    st = rep.steady
    tol = cfg.get("tolerances", {}).get("residual", 1e-10)
    if st.relative_residual > tol:
        raise SolverError(f"relative residual {st.relative_residual:.2e} exceeds {tol:g}")
    n = p.spec.n
    thermal = rep.currents.thermal(n)
    sites = _table(("site", "occupation", "thermal_current"),
                   [(k + 1, rep.occupations[k], thermal[k]) for k in range(n)])
    res = _table(("reservoir", "current"), sorted(rep.currents.per_reservoir.items()))
    diag = {"solver": st.solver, "residual": st.residual, "relative_residual": st.relative_residual,
            "physicality_margin": st.physicality_margin}
    summary = {"total_current": rep.currents.total, "diffusive_part": rep.currents.diffusive_part,
               "mean_energy": rep.mean_energy}
    return {"steady_sites": sites, "steady_reservoirs": res}, diag, summary


def _run_evolve(cfg):
    p = build_preset(cfg)
    times, occ, energy, current, how = run_evolve(p, cfg["times"], dt=cfg.get("dt"))
    cols = ("t", "energy", "total_current", *(f"N{k}" for k in range(1, p.spec.n + 1)))
    rows = [(t, e, j, *o) for t, e, j, o in zip(times, energy, current, occ)]
    return {"evolve": _table(cols, rows)}, {"propagator": how}, {}


def _run_sweep(cfg):
    sw = cfg["sweep"]
    params = dict(cfg.get("params", {}))
    if sw["kind"] == "fourier":
        res = fourier_crossover_scan(
            sw["ns"], sw.get("gamma", 0.5), zeta=params.get("zeta_end", 0.1),
            N1=sw.get("N1", 100.0), Nn=sw.get("Nn", 50.0), Omega=params.get("Omega", 0.5),
            omega=params.get("omega", 1.0), hbar=params.get("hbar", 1.0))
    else:
        params.pop("n", None)
        res = size_scan(cfg["scenario"], sw["ns"], **params)
    meta = {k: v for k, v in res.metadata.items() if isinstance(v, (int, float, str, bool))}
    return {"sweep": _table(res.columns, res.rows)}, {"sweep": meta}, {}


def _run_spectrum(cfg):
    p = build_preset(cfg)
    rep = stability_check(p.generators.Gamma)
    ev = rep.eigenvalues
    order = np.lexsort((ev.real, ev.imag))
    rows = [(i + 1, ev[j].real, ev[j].imag) for i, j in enumerate(order)]
    tables = {"spectrum": _table(("index", "real", "imag"), rows)}
    spec = p.spec
    if spec.topology == "smc":
        nu = smc_mode_frequencies(spec.n, spec.omega, spec.coupling)
    elif spec.is_uniform_rwa:
        nu = toeplitz_mode_frequencies(spec.n, spec.omega, spec.coupling)
    else:
        nu = None
    if nu is not None:
        tables["mode_frequencies"] = _table(("mode", "frequency"),
                                            [(m + 1, v) for m, v in enumerate(nu)])
    diag = {"stable": rep.stable, "spectral_gap": rep.spectral_gap}
    return tables, diag, {}


RUNNERS = {"steady": _run_steady, "evolve": _run_evolve, "sweep": _run_sweep,
           "spectrum": _run_spectrum}


def validate(cfg) -> dict:
    """Diagnostics without solving; never raises."""
    diag = {"schema_errors": [], "physics_errors": [], "warnings": []}
    if not isinstance(cfg, dict):
        diag["schema_errors"].append("<root>: config must be a mapping")
        return diag
    diag["schema_errors"] = schema_errors(cfg)
    if diag["schema_errors"]:
        return diag
    diag["physics_errors"] = physics_errors(cfg)
    if diag["physics_errors"]:
        return diag
    try:
        p = build_preset(cfg)
        gens = build_generators(p.spec, p.bank)
    except ValueError as exc:
        diag["physics_errors"].append(str(exc))
        return diag
    rep = stability_check(gens.gamma_tilde)
    if not rep.stable and cfg.get("mode", "steady") == "steady":
        diag["warnings"].append(
            f"no steady state exists: drift is not stable (spectral gap {rep.spectral_gap:.3e})")
    return diag


# entry point --------------------------------------------------------------

def _error(kind, message, code):
    sys.stderr.write(json.dumps({"error": kind, "message": message, "exit_code": code}) + "\n")
    return code


def _parse_set(items):
    out = {}
    for item in items or ():
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        out[key] = yaml.safe_load(val)
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="heatchain", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in (*MODES, "validate"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="YAML/JSON config file (or a previous report.json)")
        sp.add_argument("--scenario", choices=PRESET_NAMES, help="preset to run without a config file")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="preset parameter override")
        sp.add_argument("--seed", type=int, help="seed for randomized presets")
        if name != "validate":
            sp.add_argument("--out", default="out", help="output directory (default: out)")
            sp.add_argument("--format", choices=("csv", "json", "both"), default="both")
    return ap


def _gather(args) -> dict:
    cfg = load_config(args.config) if args.config else {}
    if args.scenario:
        cfg["scenario"] = args.scenario
    if args.set:
        cfg.setdefault("params", {}).update(_parse_set(args.set))
    if "scenario" not in cfg:
        raise ConfigError("give --config or --scenario")
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "validate":
        try:
            cfg = _gather(args)
            if args.seed is not None:
                cfg["seed"] = args.seed
        except ConfigError as exc:
            cfg = None
            diag = {"schema_errors": [str(exc)], "physics_errors": [], "warnings": []}
        else:
            diag = validate(cfg)
        print(json.dumps(diag, indent=2))
        return EXIT_OK
    try:
        cfg = resolve_config(_gather(args), args.command, args.seed)
    except ConfigError as exc:
        return _error("config", str(exc), EXIT_CONFIG)
    try:
        tables, diag, summary = RUNNERS[cfg["mode"]](cfg)
    except NoSteadyStateError as exc:
        return _error("no_steady_state", str(exc), EXIT_NO_STEADY)
    except (SolverError, np.linalg.LinAlgError) as exc:
        return _error("solver", str(exc), EXIT_SOLVER)
    report = {
        "config": cfg,
        "provenance": {"version": __version__, "numpy": np.__version__, **diag},
        "summary": summary,
    }
    try:
        written = write_outputs(Path(args.out), tables, report, args.format)
    except OSError as exc:
        return _error("io", str(exc), EXIT_IO)
    for p in written:
        print(p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
