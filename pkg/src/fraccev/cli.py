"""Command-line front end.

Usage::

    fraccev price  --config run.json [--engine series] [--out r.csv] [--format csv|json]
    fraccev xcheck --config run.json
    fraccev skew   --config run.json
    fraccev paths  --config run.json [--seed 7]

The config is one JSON document (``schema_version`` 1)::

    {
      "schema_version": 1,
      "model": {"sigma": 0.2, "beta": 1.0, "H": 0.75, "mu": 0.0, "r": 0.05, "delta": 0.02, "x0": 100},
      "contracts": [{"strike": 100, "maturity": 1.0, "t0": 0.0, "kind": "call"}],
      "engine": "series",
      "series": {...}, "pde": {...}, "mc": {...}, "kernel": {...},
      "skew": {"strikes": [80, 90, 100], "t0": 0.0, "maturity": 1.0},
      "paths": {"mode": "transformed" | "gaussian", "times": [0, 0.5, 1.0]},
      "output": {"path": null, "format": "csv"}
    }

Engine sections take the keyword arguments of ``SeriesConfig``, ``PdeGrid``,
``McConfig`` and ``KernelConfig``. Unknown keys are rejected.

Exit codes: 0 success; 1 a cross-check failed; 2 config or schema error;
3 numerical error. Errors are written to stderr as one JSON object
``{"error": {"kind": ..., "message": ..., "details": [...]}}``.

The report goes to ``--out`` when given, otherwise to stdout; the
human-readable table then goes to the other stream.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from .engines import EngineConfigs, run_engine
from .impliedvol import is_strictly_decreasing, skew_report
from .kernel import KernelConfig
from .model import ContractSpec, ModelParams, validate
from .montecarlo import McConfig, simulate_stock_paths_gaussian, simulate_y_paths
from .pde import PdeGrid
from .pricer import ENGINES, SeriesConfig

__all__ = ["SCHEMA_VERSION", "ConfigError", "RunConfig", "parse_config", "config_to_dict", "main",
           "EXIT_OK", "EXIT_XCHECK_FAIL", "EXIT_CONFIG", "EXIT_NUMERICAL", "XCHECK_TOLERANCES"]

SCHEMA_VERSION = 1
EXIT_OK, EXIT_XCHECK_FAIL, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3

# (engine a, engine b, metric, tolerance): "rel" is |a-b|/|a|, "se" is |a-b| / SE of b
XCHECK_TOLERANCES = (
    ("series", "quadrature", "rel", 1e-4),
    ("series", "pde", "rel", 5e-3),
    ("series", "mc", "se", 3.0),
)

_TOP_KEYS = {"schema_version", "model", "contract", "contracts", "engine", "series", "pde", "mc",
             "kernel", "skew", "paths", "output"}


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class SkewSpec:
    strikes: list
    t0: float = 0.0
    maturity: float = 1.0


@dataclass
class PathsSpec:
    mode: str = "transformed"
    times: list | None = None


@dataclass
class RunConfig:
    model: ModelParams
    contracts: list
    engine: str = "series"
    engines: EngineConfigs = field(default_factory=EngineConfigs)
    kernel_explicit: bool = False  # whether the config chose eta_mode itself
    skew: SkewSpec | None = None
    paths: PathsSpec = field(default_factory=PathsSpec)
    out_path: str | None = None
    out_format: str = "csv"


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _type_problem(annotation: str, val):
    """Check ``val`` against a dataclass field's annotation string."""
    if val is None:
        return None if "None" in annotation else "must not be null"
    base = annotation.split("|")[0].strip()
    if base == "float" and not _is_number(val):
        return "expected a number"
    if base == "int" and not (_is_number(val) and float(val).is_integer()):
        return "expected an integer"
    if base == "str" and not isinstance(val, str):
        return "expected a string"
    if base == "bool" and not isinstance(val, bool):
        return "expected true or false"
    if base == "list" and not isinstance(val, list):
        return "expected a list"
    return None


def _build(cls, data, section, errors):
    """Instantiate dataclass ``cls`` from a dict, collecting problems."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        errors.append(f"{section}: expected an object")
        return None
    names = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, val in data.items():
        if key not in names:
            errors.append(f"{section}.{key}: unknown key")
            continue
        problem = _type_problem(names[key].type, val)
        if problem:
            errors.append(f"{section}.{key}: {problem}")
            continue
        if names[key].type == "int":
            val = int(val)
        elif names[key].type.startswith("float") and val is not None:
            val = float(val)
        kwargs[key] = val
    missing = [n for n, f in names.items()
               if f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING and n not in data]
    for n in missing:
        errors.append(f"{section}.{n}: required")
    if missing:
        return None
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        errors.append(f"{section}: {exc}")
        return None


def _build_model(data, errors):
    if not isinstance(data, dict):
        errors.append("model: required object")
        return None
    allowed = {f.name for f in dataclasses.fields(ModelParams)}
    for key in data:
        if key not in allowed:
            errors.append(f"model.{key}: unknown key")
    vals = {k: v for k, v in data.items() if k in allowed}
    for k, v in vals.items():
        if not _is_number(v):
            errors.append(f"model.{k}: expected a number")
    if "sigma" not in vals or "beta" not in vals:
        errors.append("model: sigma and beta are required")
        return None
    if any(not _is_number(v) for v in vals.values()):
        return None
    return ModelParams(**{k: float(v) for k, v in vals.items()})


def parse_config(data: dict, engine: str | None = None, seed: int | None = None,
                 out: str | None = None, fmt: str | None = None, command: str = "price") -> RunConfig:
    """Validate a config document and apply command-line overrides.

    ``command="paths"`` also admits ``sigma = 0`` (noise-free paths).
    """
    errors = []
    if not isinstance(data, dict):
        raise ConfigError(["config: expected a JSON object"])
    if data.get("schema_version") != SCHEMA_VERSION:
        errors.append(f"schema_version: expected {SCHEMA_VERSION}, got {data.get('schema_version')!r}")
    for key in data:
        if key not in _TOP_KEYS:
            errors.append(f"{key}: unknown top-level key")

    model = _build_model(data.get("model"), errors)
    if "contract" in data and "contracts" in data:
        errors.append("contract/contracts: give only one")
    raw = data.get("contracts", [data["contract"]] if "contract" in data else [])
    if not isinstance(raw, list):
        errors.append("contracts: expected a list")
        raw = []
    contracts = []
    for i, c in enumerate(raw):
        contract = _build(ContractSpec, c, f"contracts[{i}]", errors)
        if contract is not None:
            contracts.append(contract)

    eng = engine if engine is not None else data.get("engine", "series")
    if eng not in ENGINES:
        errors.append(f"engine: {eng!r} is not one of {list(ENGINES)}")

    series = _build(SeriesConfig, data.get("series"), "series", errors)
    grid = _build(PdeGrid, data.get("pde"), "pde", errors)
    mc_data = dict(data.get("mc") or {}) if isinstance(data.get("mc", {}), dict) else data.get("mc")
    if seed is not None and isinstance(mc_data, dict):
        mc_data["seed"] = seed
    mc = _build(McConfig, mc_data, "mc", errors)
    kernel = _build(KernelConfig, data.get("kernel"), "kernel", errors)
    kernel_explicit = isinstance(data.get("kernel"), dict) and "eta_mode" in data["kernel"]

    skew = None
    if "skew" in data:
        skew = _build(SkewSpec, data["skew"], "skew", errors)
        if skew is not None:
            ks = skew.strikes
            if not isinstance(ks, list) or not ks or not all(_is_number(k) and k > 0 for k in ks):
                errors.append("skew.strikes: expected a non-empty list of positive numbers")
            elif ks != sorted(ks):
                errors.append("skew.strikes: must be sorted")
    paths = _build(PathsSpec, data.get("paths"), "paths", errors)
    if paths is not None:
        if paths.mode not in ("transformed", "gaussian"):
            errors.append("paths.mode: expected 'transformed' or 'gaussian'")
        if paths.times is not None:
            t = paths.times
            if (not isinstance(t, list) or len(t) < 2 or not all(_is_number(v) for v in t)
                    or t[0] != 0 or any(b <= a for a, b in zip(t, t[1:]))):
                errors.append("paths.times: expected a strictly increasing list starting at 0")

    output = data.get("output") or {}
    if not isinstance(output, dict):
        errors.append("output: expected an object")
        output = {}
    for key in output:
        if key not in ("path", "format"):
            errors.append(f"output.{key}: unknown key")
    out_path = out if out is not None else output.get("path")
    out_format = fmt if fmt is not None else output.get("format", "csv")
    if out_format not in ("csv", "json"):
        errors.append(f"output.format: expected 'csv' or 'json', got {out_format!r}")

    if model is not None:
        probs = validate(model, None)
        for i, c in enumerate(contracts):
            probs += [(f"contracts[{i}].{f}", m) for f, m in validate(model, c) if (f, m) not in probs
                      and f in ("strike", "t0", "maturity", "kind")]
        for f, m in probs:
            if m == "Black-Scholes branch only" and eng in ("series", "black_scholes", "pde"):
                continue
            if f == "sigma" and model.sigma == 0 and command == "paths":
                continue
            errors.append(f"model.{f}: {m}" if "." not in f else f"{f}: {m}")

    if errors:
        raise ConfigError(errors)
    return RunConfig(model=model, contracts=contracts, engine=eng,
                     engines=EngineConfigs(series=series, pde=grid, mc=mc, kernel=kernel),
                     kernel_explicit=kernel_explicit, skew=skew, paths=paths,
                     out_path=out_path, out_format=out_format)


def config_to_dict(cfg: RunConfig) -> dict:
    """The resolved config as a document ``parse_config`` accepts."""
    d = {
        "schema_version": SCHEMA_VERSION,
        "model": dataclasses.asdict(cfg.model),
        "contracts": [dataclasses.asdict(c) for c in cfg.contracts],
        "engine": cfg.engine,
        "series": dataclasses.asdict(cfg.engines.series),
        "pde": dataclasses.asdict(cfg.engines.pde),
        "mc": dataclasses.asdict(cfg.engines.mc),
        "paths": dataclasses.asdict(cfg.paths),
        "output": {"path": cfg.out_path, "format": cfg.out_format},
    }
    kernel = dataclasses.asdict(cfg.engines.kernel)
    if not cfg.kernel_explicit:
        kernel.pop("eta_mode")
    d["kernel"] = kernel
    if cfg.skew is not None:
        d["skew"] = dataclasses.asdict(cfg.skew)
    return d


# --- formatting ---------------------------------------------------------------

def _num(v):
    """12 significant digits; non-finite values become null in JSON."""
    if isinstance(v, (bool, str)) or v is None:
        return v
    if isinstance(v, (int, np.integer)):
        return int(v)
    v = float(v)
    return float(f"{v:.12g}") if math.isfinite(v) else None


def _fmt(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return ""
    return f"{float(v):.12g}"


def _csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(r[h]) for h in header])
    return buf.getvalue()


def _table(header, rows):
    cells = [[str(h) for h in header]] + [[_fmt(r[h]) for h in header] for r in rows]
    widths = [max(len(c[i]) for c in cells) for i in range(len(header))]
    return "\n".join("  ".join(c[i].rjust(widths[i]) for i in range(len(header))) for c in cells) + "\n"


def _json(doc):
    def clean(x):
        if isinstance(x, dict):
            return {k: clean(v) for k, v in x.items()}
        if isinstance(x, (list, tuple)):
            return [clean(v) for v in x]
        return _num(x)
    return json.dumps(clean(doc), indent=2) + "\n"


def _emit(cfg, report_text, human_text, stdout, stderr):
    if cfg.out_path:
        with open(cfg.out_path, "w", newline="") as fh:
            fh.write(report_text)
        stdout.write(human_text)
    else:
        stdout.write(report_text)
        stderr.write(human_text)


# --- commands -----------------------------------------------------------------

_PRICE_COLS = ["strike", "maturity", "t0", "kind", "engine", "price", "error_estimate"]


def cmd_price(cfg: RunConfig, stdout, stderr) -> int:
    if not cfg.contracts:
        raise ConfigError(["contracts: at least one contract is required"])
    rows = []
    for c in cfg.contracts:
        res = run_engine(cfg.engine, cfg.model, c, cfg.engines)
        rows.append({"strike": c.strike, "maturity": c.maturity, "t0": c.t0, "kind": c.kind,
                     "engine": res.engine, "price": res.price, "error_estimate": res.error_estimate,
                     "meta": res.meta})
    if cfg.out_format == "json":
        text = _json({"command": "price", "config": config_to_dict(cfg), "results": rows})
    else:
        text = _csv(_PRICE_COLS, rows)
    _emit(cfg, text, _table(_PRICE_COLS, rows), stdout, stderr)
    return EXIT_OK


_XCHECK_COLS = ["strike", "kind", "pair", "price_a", "price_b", "deviation", "metric", "tolerance", "status"]


def cmd_xcheck(cfg: RunConfig, stdout, stderr) -> int:
    if not cfg.contracts:
        raise ConfigError(["contracts: at least one contract is required"])
    rows = []
    engine_rows = []
    for c in cfg.contracts:
        results = {}
        for eng in ("series", "quadrature", "pde", "mc"):
            try:
                results[eng] = run_engine(eng, cfg.model, c, cfg.engines)
                engine_rows.append({"strike": c.strike, "engine": eng, "price": results[eng].price,
                                    "error_estimate": results[eng].error_estimate, "error": None})
            except Exception as exc:  # noqa: BLE001 - reported per cell
                results[eng] = exc
                engine_rows.append({"strike": c.strike, "engine": eng, "price": None,
                                    "error_estimate": None, "error": f"{type(exc).__name__}: {exc}"})
        for a, b, metric, tol in XCHECK_TOLERANCES:
            ra, rb = results[a], results[b]
            row = {"strike": c.strike, "kind": c.kind, "pair": f"{a}-{b}", "metric": metric,
                   "tolerance": tol, "price_a": None, "price_b": None, "deviation": None}
            if isinstance(ra, Exception) or isinstance(rb, Exception):
                row["status"] = "ERROR"
            else:
                row["price_a"], row["price_b"] = ra.price, rb.price
                diff = abs(ra.price - rb.price)
                if metric == "rel":
                    dev = diff / abs(ra.price) if ra.price != 0 else (0.0 if diff == 0 else math.inf)
                else:
                    se = rb.error_estimate
                    dev = diff / se if se > 0 else (0.0 if diff == 0 else math.inf)
                row["deviation"] = dev
                row["status"] = "PASS" if dev <= tol else "FAIL"
            rows.append(row)
    ok = all(r["status"] == "PASS" for r in rows)
    if cfg.out_format == "json":
        text = _json({"command": "xcheck", "config": config_to_dict(cfg), "engines": engine_rows,
                      "pairs": rows, "all_pass": ok})
    else:
        text = _csv(_XCHECK_COLS, rows)
    human = _table(_XCHECK_COLS, rows)
    for e in engine_rows:
        if e["error"]:
            human += f"engine {e['engine']} at strike {_fmt(e['strike'])}: {e['error']}\n"
    human += f"xcheck: {'all PASS' if ok else 'FAIL'}\n"
    _emit(cfg, text, human, stdout, stderr)
    return EXIT_OK if ok else EXIT_XCHECK_FAIL


def cmd_skew(cfg: RunConfig, stdout, stderr) -> int:
    if cfg.skew is None:
        raise ConfigError(["skew: section with strikes is required"])
    rows = skew_report(cfg.model, cfg.skew.strikes, cfg.skew.t0, cfg.skew.maturity, cfg.engine, cfg.engines)
    decreasing = is_strictly_decreasing(rows)
    vols = [r.implied_vol for r in rows if r.status == "ok"]
    spread = max(vols) - min(vols) if vols else math.nan
    dicts = [{"strike": r.strike, "price": r.model_price, "implied_vol": r.implied_vol,
              "engine": r.engine, "status": r.status} for r in rows]
    cols = ["strike", "price", "implied_vol", "engine", "status"]
    if cfg.out_format == "json":
        text = _json({"command": "skew", "config": config_to_dict(cfg), "rows": dicts,
                      "strictly_decreasing": decreasing, "spread": spread})
    else:
        text = _csv(cols, dicts)
    verdict = (f"skew: implied vol {'strictly decreasing' if decreasing else 'NOT strictly decreasing'}"
               f" in strike; spread {_fmt(spread)}\n")
    _emit(cfg, text, _table(cols, dicts) + verdict, stdout, stderr)
    return EXIT_OK


def cmd_paths(cfg: RunConfig, stdout, stderr) -> int:
    mc = cfg.engines.mc
    if cfg.paths.mode == "gaussian":
        kcfg = cfg.engines.kernel if cfg.kernel_explicit else dataclasses.replace(
            cfg.engines.kernel, eta_mode="real_world_mu")
        if cfg.paths.times is not None:
            times = np.asarray(cfg.paths.times, dtype=float)
        else:
            T = cfg.contracts[0].maturity if cfg.contracts else 1.0
            times = np.linspace(0.0, T, mc.n_steps + 1)
        ps, y = simulate_stock_paths_gaussian(cfg.model, times, mc, kcfg, return_gaussian=True)
        values = ps.values
    else:
        if not cfg.contracts:
            raise ConfigError(["contracts: transformed paths need a contract for [t0, T]"])
        ps = simulate_y_paths(cfg.model, cfg.contracts[0], mc, cfg.engines.kernel)
        y = None
        values = ps.values ** (1.0 / (2.0 - cfg.model.beta))
    summary = []
    for j, t in enumerate(ps.times):
        s = {"t": t, "mean_value": float(values[:, j].mean()),
             "var_value": float(values[:, j].var(ddof=1)) if values.shape[0] > 1 else math.nan}
        if y is not None:
            s["var_gaussian"] = float(y[:, j].var(ddof=1)) if y.shape[0] > 1 else math.nan
        summary.append(s)
    scols = list(summary[0].keys())
    if cfg.out_format == "json":
        text = _json({"command": "paths", "config": config_to_dict(cfg), "mode": cfg.paths.mode,
                      "times": ps.times.tolist(),
                      "paths": [{"path_id": i, "values": values[i].tolist(), "absorbed_flag": bool(ps.absorbed[i])}
                                for i in range(values.shape[0])],
                      "summary": summary})
    else:
        buf = io.StringIO()
        buf.write("path_id,t,value,absorbed_flag\n")
        for i in range(values.shape[0]):
            flag = int(ps.absorbed[i])
            for t, v in zip(ps.times, values[i]):
                buf.write(f"{i},{t:.12g},{v:.12g},{flag}\n")
        text = buf.getvalue()
    _emit(cfg, text, _table(scols, summary), stdout, stderr)
    return EXIT_OK


COMMANDS = {"price": cmd_price, "xcheck": cmd_xcheck, "skew": cmd_skew, "paths": cmd_paths}


def _parser():
    p = argparse.ArgumentParser(prog="fraccev", description="Fractional CEV option pricing.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="JSON run configuration")
        s.add_argument("--engine", choices=ENGINES)
        s.add_argument("--out", help="report file (default: stdout)")
        s.add_argument("--format", choices=("csv", "json"))
        s.add_argument("--seed", type=int, help="Monte Carlo seed, unsigned 64-bit")
    return p


def _fail(stderr, kind, message, details=(), code=EXIT_NUMERICAL):
    stderr.write(json.dumps({"error": {"kind": kind, "message": message, "details": list(details)}}) + "\n")
    return code


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        with open(args.config) as fh:
            data = json.load(fh)
        cfg = parse_config(data, engine=args.engine, seed=args.seed, out=args.out, fmt=args.format,
                           command=args.command)
        return COMMANDS[args.command](cfg, stdout, stderr)
    except ConfigError as exc:
        return _fail(stderr, "config", str(exc), exc.errors, EXIT_CONFIG)
    except (OSError, json.JSONDecodeError) as exc:
        return _fail(stderr, "config", f"cannot read config: {exc}", code=EXIT_CONFIG)
    except (ArithmeticError, ValueError) as exc:
        return _fail(stderr, "numerical", f"{type(exc).__name__}: {exc}")


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
