"""Batch front-end: ``python -m fermicond --config run.json``.

A run is described by one JSON document.  Every report echoes the normalized
configuration, which parses back to the same RunConfig.  Floats are written
with 17 significant digits so identical configs give byte-identical files.

Exit status: 0 converged, 2 completed but not converged, 1 error (with a JSON
error object on stderr).
"""
import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

THREADS_ENV = "FERMICOND_THREADS"
COMMANDS = ("specfun-table", "free1d", "scatter", "conduct", "sweep", "channels3d")
FORMATS = ("json", "csv")
CSV_HEADERS = {
    "specfun-table": "x,si,ci,u,U",
    "scatter": "k,re_t,im_t,re_r,im_r,T",
    "sweep": "alpha,g,error",
}
_NEEDS_POTENTIAL = ("scatter", "conduct", "sweep")

_TOP_KEYS = {"command", "potential", "fermi", "mu_L", "mu_R", "numerics", "output",
             "alphas", "x_grid", "geometry", "allow_bound_states"}
_FERMI_KEYS = {"mu_L", "mu_R"}
_NUMERICS_KEYS = {"grid_extent", "grid_spacing", "k_max", "k_spacing", "tolerances"}
_TOL_KEYS = {"conductance", "integral", "flux"}
_OUTPUT_KEYS = {"path", "format"}
_XGRID_KEYS = {"start", "stop", "count"}
_GEOMETRY_KEYS = {"k_F", "L2", "L3"}

DEFAULT_TOLERANCES = {"conductance": 1e-4, "integral": 1e-12, "flux": 1e-10}
DEFAULT_X_GRID = {"start": 0.1, "stop": 50.0, "count": 500}
DEFAULT_K_MAX = 5.0
DEFAULT_K_SPACING = 0.025


class ConfigError(ValueError):
    """Invalid run configuration; ``path`` names the offending field."""

    kind = "config-error"

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class ConfigParseError(ConfigError):
    kind = "config-parse-error"

    def __init__(self, message: str, line: int, column: int):
        super().__init__("", f"malformed JSON at line {line}, column {column}: {message}")
        self.line = line
        self.column = column


@dataclass(frozen=True)
class RunConfig:
    command: str
    potential: Optional[dict] = None
    fermi: Optional[dict] = None
    numerics: dict = field(default_factory=dict)
    output: dict = field(default_factory=lambda: {"path": None, "format": "json"})
    alphas: Optional[tuple] = None
    x_grid: Optional[dict] = None
    geometry: Optional[dict] = None
    allow_bound_states: bool = False

    def to_dict(self) -> dict:
        d = {"command": self.command}
        if self.potential is not None:
            d["potential"] = self.potential
        if self.fermi is not None:
            d["fermi"] = dict(self.fermi)
        d["numerics"] = dict(self.numerics)
        d["output"] = dict(self.output)
        if self.alphas is not None:
            d["alphas"] = list(self.alphas)
        if self.x_grid is not None:
            d["x_grid"] = dict(self.x_grid)
        if self.geometry is not None:
            d["geometry"] = dict(self.geometry)
        d["allow_bound_states"] = self.allow_bound_states
        return d


# ---------------------------------------------------------------- validation

def _reject_unknown(obj, allowed, path):
    if not isinstance(obj, dict):
        raise ConfigError(path or "<root>", "expected a JSON object")
    for key in obj:
        if key not in allowed:
            where = f"{path}.{key}" if path else key
            raise ConfigError(where, f"unknown key (allowed: {', '.join(sorted(allowed))})")


def _number(value, path, positive=False, allow_none=False):
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    v = float(value)
    if not math.isfinite(v):
        raise ConfigError(path, "must be finite")
    if positive and v <= 0:
        raise ConfigError(path, f"must be positive, got {v!r}")
    return v


def _fermi(doc):
    fermi = doc.get("fermi")
    if fermi is None:
        fermi = {k: doc[k] for k in _FERMI_KEYS if k in doc}
    elif any(k in doc for k in _FERMI_KEYS):
        raise ConfigError("fermi", "give mu_L/mu_R either at top level or under fermi, not both")
    _reject_unknown(fermi, _FERMI_KEYS, "fermi")
    for k in ("mu_L", "mu_R"):
        if k not in fermi:
            raise ConfigError(f"fermi.{k}", "required")
    return {k: _number(fermi[k], f"fermi.{k}", positive=True) for k in ("mu_L", "mu_R")}


def _numerics(raw):
    raw = {} if raw is None else raw
    _reject_unknown(raw, _NUMERICS_KEYS, "numerics")
    out = {}
    for k in ("grid_extent", "grid_spacing", "k_max", "k_spacing"):
        out[k] = _number(raw.get(k), f"numerics.{k}", positive=True, allow_none=True)
    tol = raw.get("tolerances", {})
    _reject_unknown(tol, _TOL_KEYS, "numerics.tolerances")
    merged = dict(DEFAULT_TOLERANCES)
    for k, v in tol.items():
        merged[k] = _number(v, f"numerics.tolerances.{k}", positive=True)
    out["tolerances"] = merged
    return out


def _output(raw, command):
    raw = {} if raw is None else raw
    _reject_unknown(raw, _OUTPUT_KEYS, "output")
    path = raw.get("path")
    if path is not None and not isinstance(path, str):
        raise ConfigError("output.path", "expected a string")
    fmt = raw.get("format", "json")
    if fmt not in FORMATS:
        raise ConfigError("output.format", f"expected one of {FORMATS}, got {fmt!r}")
    if fmt == "csv" and command not in CSV_HEADERS:
        raise ConfigError("output.format", f"command {command!r} has no CSV output")
    return {"path": path, "format": fmt}


def _potential(raw):
    from .errors import FermiCondError
    from .scattering import PotentialSpec
    try:
        spec = PotentialSpec.from_dict(raw) if isinstance(raw, dict) else None
    except (FermiCondError, TypeError, ValueError, KeyError, IndexError) as exc:
        raise ConfigError("potential", str(exc)) from exc
    if spec is None:
        raise ConfigError("potential", "expected a JSON object")
    return spec.to_dict()


def _x_grid(raw):
    raw = {} if raw is None else raw
    _reject_unknown(raw, _XGRID_KEYS, "x_grid")
    raw = dict(DEFAULT_X_GRID, **raw)
    start = _number(raw["start"], "x_grid.start")
    stop = _number(raw["stop"], "x_grid.stop")
    count = raw["count"]
    if isinstance(count, bool) or not isinstance(count, int) or count < 1:
        raise ConfigError("x_grid.count", "expected a positive integer")
    if stop < start:
        raise ConfigError("x_grid.stop", "must not be below x_grid.start")
    return {"start": start, "stop": stop, "count": count}


def _geometry(raw):
    if raw is None:
        raise ConfigError("geometry", "required for channels3d")
    _reject_unknown(raw, _GEOMETRY_KEYS, "geometry")
    out = {}
    for k in ("k_F", "L2", "L3"):
        if k not in raw:
            raise ConfigError(f"geometry.{k}", "required")
        out[k] = _number(raw[k], f"geometry.{k}", positive=True)
    return out


def _alphas(raw):
    if raw is None:
        raise ConfigError("alphas", "required for sweep")
    if not isinstance(raw, list) or not raw:
        raise ConfigError("alphas", "expected a non-empty list of numbers")
    return tuple(_number(a, f"alphas[{i}]") for i, a in enumerate(raw))


def validate(doc) -> RunConfig:
    """Turn a decoded JSON document into a RunConfig with defaults filled."""
    _reject_unknown(doc, _TOP_KEYS, "")
    command = doc.get("command")
    if command not in COMMANDS:
        raise ConfigError("command", f"expected one of {COMMANDS}, got {command!r}")
    kw = {"command": command,
          "numerics": _numerics(doc.get("numerics")),
          "output": _output(doc.get("output"), command)}
    allow = doc.get("allow_bound_states", False)
    if not isinstance(allow, bool):
        raise ConfigError("allow_bound_states", "expected true or false")
    kw["allow_bound_states"] = allow

    if command in ("free1d", "conduct", "sweep"):
        kw["fermi"] = _fermi(doc)
    elif "fermi" in doc or any(k in doc for k in _FERMI_KEYS):
        raise ConfigError("fermi", f"not used by {command}")
    if command in _NEEDS_POTENTIAL:
        if "potential" not in doc:
            raise ConfigError("potential", f"required for {command}")
        kw["potential"] = _potential(doc["potential"])
    elif "potential" in doc:
        raise ConfigError("potential", f"not used by {command}")
    if command == "sweep":
        kw["alphas"] = _alphas(doc.get("alphas"))
    elif "alphas" in doc:
        raise ConfigError("alphas", f"not used by {command}")
    if command == "specfun-table":
        kw["x_grid"] = _x_grid(doc.get("x_grid"))
    elif "x_grid" in doc:
        raise ConfigError("x_grid", f"not used by {command}")
    if command == "channels3d":
        kw["geometry"] = _geometry(doc.get("geometry"))
    elif "geometry" in doc:
        raise ConfigError("geometry", f"not used by {command}")
    return RunConfig(**kw)


def parse_config(text: str) -> RunConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(exc.msg, exc.lineno, exc.colno) from exc
    return validate(doc)


# ---------------------------------------------------------------- serialization

def format_float(v: float) -> str:
    if math.isnan(v):
        return "NaN"
    if math.isinf(v):
        return "Infinity" if v > 0 else "-Infinity"
    return format(v, ".16e")


def dumps(obj, indent: int = 2) -> str:
    """JSON text with every float written in 17-digit scientific notation."""
    import numpy as np

    def enc(o, level):
        pad = " " * (indent * (level + 1))
        end = " " * (indent * level)
        if isinstance(o, (bool, np.bool_)):
            return "true" if o else "false"
        if o is None:
            return "null"
        if isinstance(o, (int, np.integer)):
            return str(int(o))
        if isinstance(o, (float, np.floating)):
            return format_float(float(o))
        if isinstance(o, str):
            return json.dumps(o)
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = [f"{pad}{json.dumps(str(k))}: {enc(v, level + 1)}" for k, v in o.items()]
            return "{\n" + ",\n".join(items) + "\n" + end + "}"
        if isinstance(o, (list, tuple, np.ndarray)):
            if len(o) == 0:
                return "[]"
            items = [pad + enc(v, level + 1) for v in o]
            return "[\n" + ",\n".join(items) + "\n" + end + "]"
        raise TypeError(f"cannot serialize {type(o).__name__}")

    return enc(obj, 0) + "\n"


def csv_text(header: str, rows) -> str:
    lines = [header]
    for row in rows:
        lines.append(",".join(format_float(float(v)) for v in row))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- commands

@dataclass
class RunOutcome:
    report: dict
    converged: bool
    rows: Optional[list] = None


def _numerics_for(cfg: RunConfig, threads: int):
    from .conductance import Numerics
    n = cfg.numerics
    return Numerics(extent=n["grid_extent"], spacing=n["grid_spacing"], band_limit=n["k_max"],
                    allow_bound_states=cfg.allow_bound_states, workers=max(1, threads))


def _cmd_specfun_table(cfg, threads):
    import numpy as np
    from .specfun import U_kernel, ci, si, u_kernel
    g = cfg.x_grid
    x = np.linspace(g["start"], g["stop"], g["count"])
    if np.any(x == 0):
        raise ConfigError("x_grid", "the table is singular at x = 0")
    rows = np.column_stack([x, si(x), ci(x), u_kernel(x), U_kernel(x)])
    return RunOutcome({"rows": len(rows)}, True, rows.tolist())


def _conductance_outcome(report, tol):
    d = report.to_dict()
    converged = (report.numeric_error_estimate <= tol and report.y_probe_spread <= tol)
    return RunOutcome(d, converged)


def _cmd_free1d(cfg, threads):
    from .conductance import conductance_free
    from .kernels import FermiData
    report = conductance_free(FermiData(**cfg.fermi), _numerics_for(cfg, threads))
    return _conductance_outcome(report, cfg.numerics["tolerances"]["conductance"])


def _cmd_conduct(cfg, threads):
    from .conductance import conductance
    from .kernels import FermiData
    from .scattering import PotentialSpec
    report = conductance(PotentialSpec.from_dict(cfg.potential), FermiData(**cfg.fermi),
                         _numerics_for(cfg, threads))
    return _conductance_outcome(report, cfg.numerics["tolerances"]["conductance"])


def _cmd_scatter(cfg, threads):
    import numpy as np
    from .scattering import PotentialSpec, solve_scattering_states
    spec = PotentialSpec.from_dict(cfg.potential)
    k_max = cfg.numerics["k_max"] or DEFAULT_K_MAX
    dk = cfg.numerics["k_spacing"] or DEFAULT_K_SPACING
    n = int(math.floor(k_max / dk + 1e-9))
    if n < 1:
        raise ConfigError("numerics.k_spacing", "must not exceed numerics.k_max")
    ks = dk * np.arange(1, n + 1)
    t, r, _ = solve_scattering_states(spec, ks)
    T = np.abs(t) ** 2
    defect = float(np.max(np.abs(T + np.abs(r) ** 2 - 1)))
    rows = np.column_stack([ks, t.real, t.imag, r.real, r.imag, T])
    report = {"rows": int(n), "k_spacing": dk, "k_max": float(ks[-1]), "max_flux_defect": defect}
    return RunOutcome(report, defect <= cfg.numerics["tolerances"]["flux"], rows.tolist())


def _cmd_sweep(cfg, threads):
    from .conductance import sweep_alpha
    from .kernels import FermiData
    from .scattering import PotentialSpec
    res = sweep_alpha(PotentialSpec.from_dict(cfg.potential), FermiData(**cfg.fermi),
                      cfg.alphas, _numerics_for(cfg, threads))
    tol = cfg.numerics["tolerances"]["conductance"]
    summary = res.to_dict()
    summary["reports"] = [r.to_dict() for r in res.reports]
    converged = all(e <= tol for e in res.errors)
    rows = [[a, g, e] for a, g, e in zip(res.alphas, res.g_values, res.errors)]
    return RunOutcome(summary, converged, rows)


def _cmd_channels3d(cfg, threads):
    from .channels3d import TransverseGeometry, channel_report
    g = cfg.geometry
    return RunOutcome(channel_report(g["k_F"], TransverseGeometry(g["L2"], g["L3"])), True)


_DISPATCH = {
    "specfun-table": _cmd_specfun_table,
    "free1d": _cmd_free1d,
    "scatter": _cmd_scatter,
    "conduct": _cmd_conduct,
    "sweep": _cmd_sweep,
    "channels3d": _cmd_channels3d,
}


def execute(cfg: RunConfig, threads: int = 1) -> RunOutcome:
    out = _DISPATCH[cfg.command](cfg, threads)
    out.report = {"command": cfg.command, "converged": out.converged,
                  "result": out.report, "config": cfg.to_dict()}
    return out


def render(cfg: RunConfig, outcome: RunOutcome):
    """(primary text, sidecar JSON text or None) for the configured format."""
    report_text = dumps(outcome.report)
    if cfg.output["format"] == "csv":
        return csv_text(CSV_HEADERS[cfg.command], outcome.rows), report_text
    if outcome.rows is not None:
        full = dict(outcome.report)
        full["columns"] = CSV_HEADERS[cfg.command].split(",")
        full["rows"] = outcome.rows
        return dumps(full), None
    return report_text, None


def _write(cfg: RunConfig, outcome: RunOutcome, stdout):
    primary, sidecar = render(cfg, outcome)
    path = cfg.output["path"]
    if path is None:
        stdout.write(primary)
        return
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(primary)
    if sidecar is not None:
        p.with_name(p.stem + ".summary.json").write_text(sidecar)


def _error_json(exc) -> str:
    err = {"kind": getattr(exc, "kind", "internal-error"), "message": str(exc)}
    if isinstance(exc, ConfigError) and exc.path:
        err["path"] = exc.path
    if isinstance(exc, ConfigParseError):
        err["line"], err["column"] = exc.line, exc.column
    partial = getattr(exc, "partial", None)
    if partial is not None:
        err["partial"] = partial
    return json.dumps({"error": err}, sort_keys=True)


def _threads(flag: Optional[int]) -> int:
    if flag is not None:
        if flag < 1:
            raise ConfigError("--threads", "must be at least 1")
        return flag
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            n = int(env)
        except ValueError as exc:
            raise ConfigError(THREADS_ENV, f"expected an integer, got {env!r}") from exc
        if n < 1:
            raise ConfigError(THREADS_ENV, "must be at least 1")
        return n
    return 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fermicond", description="Conductance of a 1D Fermi gas.")
    p.add_argument("--config", required=True, help="JSON run configuration ('-' reads stdin)")
    p.add_argument("--out", help="output path (overrides output.path)")
    p.add_argument("--format", choices=FORMATS, help="output format (overrides output.format)")
    p.add_argument("--allow-bound-states", action="store_true",
                   help="compute conductance even if the potential binds states")
    p.add_argument("--threads", type=int, help=f"worker threads (default: ${THREADS_ENV} or 1)")
    return p


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    try:
        text = sys.stdin.read() if args.config == "-" else Path(args.config).read_text()
        doc_cfg = parse_config(text)
        overrides = {}
        if args.out is not None or args.format is not None:
            out = dict(doc_cfg.output)
            if args.out is not None:
                out["path"] = args.out
            if args.format is not None:
                out["format"] = args.format
            overrides["output"] = out
        if args.allow_bound_states:
            overrides["allow_bound_states"] = True
        cfg = validate(dict(doc_cfg.to_dict(), **overrides)) if overrides else doc_cfg
        threads = _threads(args.threads)
        outcome = execute(cfg, threads)
        _write(cfg, outcome, stdout)
    except Exception as exc:  # every failure becomes exit 1 with a JSON record
        stderr.write(_error_json(exc) + "\n")
        return 1
    return 0 if outcome.converged else 2


if __name__ == "__main__":
    sys.exit(main())
