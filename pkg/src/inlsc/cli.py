"""Command-line front end.

    inlsc --config run.ini [--out DIR] [--jobs N] [--section.key=value ...]

The configuration is an INI file with sections [run], [params], [grid],
[solver], [initial_data], [output], [virial] and [sweep].  Every key can be
overridden on the command line.  Exit codes: 0 ok, 2 invalid input, 3 solver
failure, 4 blowup detected.
"""
from __future__ import annotations

import argparse
import configparser
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import classifier as cls
from . import ground_state as gs
from . import params as pm
from . import virial as vr
from .evolution import SolverConfig, SolverError, Status, evolve
from .grid import RadialGrid, read_field_csv, write_field_csv

log = logging.getLogger("inlsc")

EXIT_OK, EXIT_INVALID, EXIT_SOLVER, EXIT_BLOWUP = 0, 2, 3, 4
SCENARIOS = ("params-check", "groundstate", "evolve", "classify", "virial-check", "sweep")
INITIAL_KINDS = ("gaussian", "ground_state", "scaled_ground_state", "file")

DEFAULTS = {
    "run": {"scenario": "params-check"},
    "params": {"d": "3", "b": "1", "sigma": "", "lam": "-1", "c": "0"},
    "grid": {"r_max": "50", "n": "", "h": "0.01"},
    "solver": {},
    "initial_data": {"kind": "gaussian", "amplitude": "1", "width": "1", "a": "1",
                     "epsilon": "1", "path": "", "taper": "auto",
                     "taper_start": "0.5", "taper_stop": "0.8", "data_class": "radial"},
    "output": {"directory": "out", "sample_interval": "0.01"},
    "virial": {"enabled": "false", "radii": "", "window": ""},
    "sweep": {"scenario": "evolve", "key": "", "values": ""},
}


class ConfigError(ValueError):
    """Invalid or incomplete run configuration (exit code 2)."""


def parse_number(text: str) -> Fraction:
    """Exact parse of '1', '-3/16', '0.25', '1e-3'."""
    text = text.strip()
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"not a number: {text!r}") from exc


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _floats(text: str) -> list[float]:
    return [float(parse_number(x)) for x in text.split(",") if x.strip()]


@dataclass
class RunConfig:
    scenario: str
    params: pm.ParamSet
    grid: RadialGrid
    solver: SolverConfig
    initial: dict
    out_dir: Path
    sample_interval: float
    virial: bool = False
    virial_radii: list = field(default_factory=list)
    virial_window: tuple | None = None
    sweep: dict = field(default_factory=dict)
    raw: configparser.ConfigParser | None = None


def load_parser(path: str | None, overrides: dict[str, str]) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None)
    cp.read_dict(DEFAULTS)
    if path:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {path}")
        cp.read(p)
    for dotted, value in overrides.items():
        section, _, key = dotted.partition(".")
        if not key or section not in DEFAULTS:
            raise ConfigError(f"override must look like --section.key=value, got --{dotted}")
        cp.set(section, key, value)
    return cp


def build_config(cp: configparser.ConfigParser) -> RunConfig:
    for section in cp.sections():
        if section not in DEFAULTS:
            raise ConfigError(f"unknown section [{section}]")
    scenario = cp.get("run", "scenario").strip()
    if scenario not in SCENARIOS:
        raise ConfigError(f"scenario must be one of {SCENARIOS}, got {scenario!r}")

    P = cp["params"]
    try:
        params = pm.ParamSet(
            d=int(P["d"]), b=parse_number(P["b"]),
            sigma=parse_number(P["sigma"]) if P["sigma"].strip() else None,
            lam=int(P["lam"]), c=parse_number(P["c"]))
    except pm.ParameterError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"[params]: {exc}") from exc

    G = cp["grid"]
    r_max = float(parse_number(G["r_max"]))
    # an explicit node count wins over the spacing
    if G["n"].strip():
        n = int(G["n"])
        grid = RadialGrid(params.d, n, r_max / n)
    elif G["h"].strip():
        grid = RadialGrid.from_rmax(params.d, r_max, float(parse_number(G["h"])))
    else:
        raise ConfigError("[grid] needs n or h")

    known = {f.name: f.type for f in fields(SolverConfig)}
    kw = {}
    for key, value in cp["solver"].items():
        if key not in known:
            raise ConfigError(f"unknown [solver] key {key!r}")
        if key in ("adaptive", "nonlinear"):
            kw[key] = _bool(value)
        elif key in ("calm_steps", "max_steps"):
            kw[key] = int(value)
        elif key == "output_interval":
            kw[key] = float(parse_number(value)) if value.strip() else None
        else:
            kw[key] = float(parse_number(value))
    try:
        solver = SolverConfig(**kw)
    except ValueError as exc:
        raise ConfigError(f"[solver]: {exc}") from exc

    I = dict(cp["initial_data"])
    if I["kind"] not in INITIAL_KINDS:
        raise ConfigError(f"initial_data.kind must be one of {INITIAL_KINDS}")
    if I["kind"] == "file" and not Path(I["path"]).is_file():
        raise ConfigError(f"initial data file not found: {I['path']!r}")
    if I["data_class"] not in cls.DATA_CLASSES:
        raise ConfigError(f"initial_data.data_class must be one of {cls.DATA_CLASSES}")

    O = cp["output"]
    V = cp["virial"]
    window = _floats(V["window"]) if V["window"].strip() else None
    if window is not None and len(window) != 2:
        raise ConfigError("virial.window needs two numbers 'lo, hi'")
    sweep = dict(cp["sweep"])
    if scenario == "sweep":
        if sweep["scenario"] not in SCENARIOS or sweep["scenario"] == "sweep":
            raise ConfigError("sweep.scenario must name a non-sweep scenario")
        if "." not in sweep["key"] or not sweep["values"].strip():
            raise ConfigError("sweep needs key = section.key and a comma-separated values list")
    interval = float(parse_number(O["sample_interval"]))
    if not interval > 0:
        raise ConfigError("output.sample_interval must be positive")
    return RunConfig(
        scenario=scenario, params=params, grid=grid, solver=solver, initial=I,
        out_dir=Path(O["directory"]), sample_interval=interval,
        virial=_bool(V["enabled"]),
        virial_radii=_floats(V["radii"]), virial_window=tuple(window) if window else None,
        sweep=sweep, raw=cp)


# -- initial data -----------------------------------------------------------

def initial_field(cfg: RunConfig, taper_default: bool):
    """Return (field to evolve, untapered field used for classification)."""
    I, g, p = cfg.initial, cfg.grid, cfg.params
    kind = I["kind"]
    if kind == "gaussian":
        amp, width = float(parse_number(I["amplitude"])), float(parse_number(I["width"]))
        u = g.sample(lambda r: amp * np.exp(-(r / width) ** 2))
    elif kind in ("ground_state", "scaled_ground_state"):
        a = float(parse_number(I["a"])) if kind == "scaled_ground_state" else 1.0
        eps = float(parse_number(I["epsilon"]))
        u = cls.scaled_ground_state(p, g, a, eps)
    else:
        u = read_field_csv(I["path"], p.d)
        if u.grid.n != g.n or not math.isclose(u.grid.h, g.h, rel_tol=1e-12):
            raise ConfigError("initial data file does not match the configured grid")
    taper = I["taper"].strip().lower()
    use = (kind in ("ground_state", "scaled_ground_state")) if taper == "auto" else _bool(taper)
    if use and taper_default:
        t = g.edge_taper(float(I["taper_start"]), float(I["taper_stop"]))
        return g.field(u.values * t), u
    return u, u


# -- scenarios --------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_summary(path: Path, items: dict) -> None:
    with path.open("w") as fh:
        for k, v in items.items():
            fh.write(f"{k}={_fmt(v)}\n")


def scenario_params_check(cfg: RunConfig, summary: dict) -> int:
    ex = pm.derive(cfg.params)
    width = max(len(k) for k, _ in ex.as_rows())
    for name, value in ex.as_rows():
        print(f"{name:<{width}}  {value}")
        summary[name] = value
    rep = pm.validate_wellposed(cfg.params)
    for line in rep.lines():
        print(line)
    for ch in rep.checks:
        summary[f"check.{ch.name}"] = "pass" if ch.passed else "fail"
    summary["wellposed"] = rep.passed
    return EXIT_OK


def scenario_groundstate(cfg: RunConfig, summary: dict) -> int:
    p = cfg.params
    if p.c > 0:
        raise pm.ParameterError("closed-form ground state needs c <= 0")
    spec = gs.GroundStateSpec(p.d, p.b, p.c, float(parse_number(cfg.initial["epsilon"])))
    rep = gs.identities_report(spec, cfg.grid)
    for k, v in rep.as_dict().items():
        print(f"{k} = {v}")
        summary[k] = v
    summary["el_residual"] = gs.el_residual(spec, cfg.grid)
    print(f"el_residual = {summary['el_residual']}")
    write_field_csv(cfg.out_dir / "ground_state.csv", gs.W_field(spec, cfg.grid))
    return EXIT_OK


def _verdict(cfg: RunConfig, u, summary: dict) -> None:
    try:
        v = cls.classify(u, cfg.params, cfg.initial["data_class"])
    except pm.ParameterError as exc:
        summary["verdict"] = "unavailable"
        summary["verdict_reason"] = str(exc)
        return
    for k, val in v.summary().items():
        summary[f"verdict.{k}"] = val


def scenario_classify(cfg: RunConfig, summary: dict) -> int:
    _, u = initial_field(cfg, taper_default=False)
    v = cls.classify(u, cfg.params, cfg.initial["data_class"])
    for k, val in v.summary().items():
        print(f"{k} = {val}")
        summary[k] = val
    return EXIT_OK


def _probes(cfg: RunConfig, always_virial: bool = False) -> dict:
    p = cfg.params
    probes = {}
    if cfg.virial or always_virial:
        probes["virial_rhs"] = lambda u: vr.virial_rhs(u, p, "form")
        for R in cfg.virial_radii:
            cut = vr.CutoffSpec(R)
            probes[f"localized_virial_rhs_R{R:g}"] = (lambda c: lambda u: vr.localized_virial_rhs(u, p, c))(cut)
    return probes


def _run_evolution(cfg: RunConfig, summary: dict, always_virial: bool = False):
    u0, untapered = initial_field(cfg, taper_default=True)
    solver = cfg.solver
    if solver.output_interval is None:
        solver = SolverConfig(**{**solver.__dict__, "output_interval": cfg.sample_interval})
    summary["initial_kind"] = cfg.initial["kind"]
    summary["tapered"] = u0 is not untapered
    if cfg.params.is_energy_critical:
        _verdict(cfg, untapered, summary)
    write_field_csv(cfg.out_dir / "field_t0.csv", u0)
    t0 = time.perf_counter()
    try:
        state, series = evolve(u0, cfg.params, solver, _probes(cfg, always_virial))
    finally:
        summary["wall_time_s"] = round(time.perf_counter() - t0, 3)
    series.to_csv(cfg.out_dir / "diagnostics.csv")
    write_field_csv(cfg.out_dir / "field_final.csv", state.field)
    m = series.column("mass")
    e = series.column("energy")
    summary.update({
        "status": state.status.value, "reason": state.reason, "t_final": state.t,
        "steps": state.n_steps, "rejected_steps": state.rejected, "dt_final": state.dt,
        "mass_drift_rel": float(abs(m[-1] - m[0]) / m[0]) if m[0] else 0.0,
        "energy_drift_rel": float(abs(e[-1] - e[0]) / abs(e[0])) if e[0] else float(abs(e[-1] - e[0])),
        "kinetic_final": state.last.kinetic_c,
    })
    print(f"status={state.status.value} t={state.t:.6g} steps={state.n_steps}"
          + (f" ({state.reason})" if state.reason else ""))
    return state, series


def _status_code(state) -> int:
    return EXIT_BLOWUP if state.status is Status.BLOWUP else EXIT_OK


def scenario_evolve(cfg: RunConfig, summary: dict) -> int:
    state, _ = _run_evolution(cfg, summary)
    return _status_code(state)


def scenario_virial_check(cfg: RunConfig, summary: dict) -> int:
    for R in cfg.virial_radii:
        chk = vr.cutoff_check(vr.CutoffSpec(R), cfg.grid)
        for k, v in chk.margins.items():
            summary[f"cutoff_R{R:g}.{k}"] = v
        summary[f"cutoff_R{R:g}.passed"] = chk.passed
    state, series = _run_evolution(cfg, summary, always_virial=True)
    if len(series) >= 3:
        rep = vr.virial_consistency(series, cfg.virial_window)
        summary["virial_max_abs_mismatch"] = rep.max_abs
        summary["virial_max_rel_mismatch"] = rep.max_rel
        print(f"virial mismatch: max_abs={rep.max_abs:.3e} max_rel={rep.max_rel:.3e}")
    return _status_code(state)


def _sweep_child(args: tuple) -> tuple[str, int]:
    cfg_items, label = args
    cp = configparser.ConfigParser(interpolation=None)
    cp.read_dict(cfg_items)
    return label, run_parser(cp)


def scenario_sweep(cfg: RunConfig, summary: dict, jobs: int) -> int:
    key = cfg.sweep["key"]
    section, _, option = key.partition(".")
    values = [v.strip() for v in cfg.sweep["values"].split(",") if v.strip()]
    tasks = []
    for i, value in enumerate(values):
        items = {s: dict(cfg.raw[s]) for s in cfg.raw.sections()}
        items["run"]["scenario"] = cfg.sweep["scenario"]
        items[section][option] = value
        sub = cfg.out_dir / f"run_{i:03d}"
        items["output"]["directory"] = str(sub)
        tasks.append((items, f"{key}={value}"))
    with ProcessPoolExecutor(max_workers=max(1, jobs)) as pool:
        results = list(pool.map(_sweep_child, tasks))
    for i, (label, code) in enumerate(results):
        summary[f"run_{i:03d}"] = f"{label} exit={code}"
        print(f"run_{i:03d}: {label} -> exit {code}")
    summary["runs"] = len(results)
    return EXIT_OK


def run_parser(cp: configparser.ConfigParser, jobs: int = 1) -> int:
    """Build the configuration, run the scenario, always write summary.txt."""
    summary: dict = {}
    out_dir = Path(cp.get("output", "directory", fallback="out"))
    code = EXIT_OK
    try:
        cfg = build_config(cp)
        out_dir = cfg.out_dir
        out_dir.mkdir(parents=True, exist_ok=True)
        summary["scenario"] = cfg.scenario
        summary.update({f"params.{k}": getattr(cfg.params, k) for k in ("d", "b", "sigma", "lam", "c")})
        summary.update({"grid.n": cfg.grid.n, "grid.h": cfg.grid.h, "grid.r_max": cfg.grid.r_max})
        if cfg.scenario == "sweep":
            code = scenario_sweep(cfg, summary, jobs)
        else:
            code = SCENARIO_FUNCS[cfg.scenario](cfg, summary)
    except (ConfigError, pm.ParameterError, ValueError) as exc:
        code = EXIT_INVALID
        summary["error"] = f"{type(exc).__name__}: {exc}"
        print(f"error: {exc}", file=sys.stderr)
    except SolverError as exc:
        code = EXIT_SOLVER
        summary["error"] = f"SolverError: {exc}"
        print(f"solver error: {exc}", file=sys.stderr)
    summary["exit_code"] = code
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        write_summary(out_dir / "summary.txt", summary)
    except OSError as exc:
        print(f"could not write summary: {exc}", file=sys.stderr)
    return code


SCENARIO_FUNCS = {
    "params-check": scenario_params_check,
    "groundstate": scenario_groundstate,
    "evolve": scenario_evolve,
    "classify": scenario_classify,
    "virial-check": scenario_virial_check,
}


def split_overrides(extra: list[str]) -> dict[str, str]:
    """Turn ['--a.b=1', '--c.d', '2'] into {'a.b': '1', 'c.d': '2'}."""
    out = {}
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--") or "." not in tok:
            raise ConfigError(f"unrecognised argument {tok!r}")
        body = tok[2:]
        if "=" in body:
            k, v = body.split("=", 1)
        else:
            if i + 1 >= len(extra):
                raise ConfigError(f"missing value for {tok}")
            k, v = body, extra[i + 1]
            i += 1
        out[k] = v
        i += 1
    return out


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="inlsc", description=__doc__.split("\n\n")[0],
                                 epilog="Any config key can be overridden as --section.key=value.")
    ap.add_argument("--config", help="INI configuration file")
    ap.add_argument("--out", help="output directory (overrides output.directory)")
    ap.add_argument("--jobs", type=int, default=1, help="parallel runs for the sweep scenario")
    ap.add_argument("--scenario", choices=SCENARIOS, help="shorthand for --run.scenario")
    ap.add_argument("-v", "--verbose", action="store_true")
    args, extra = ap.parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        overrides = split_overrides(extra)
        if args.scenario:
            overrides["run.scenario"] = args.scenario
        if args.out:
            overrides["output.directory"] = args.out
        cp = load_parser(args.config, overrides)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if args.out:
            Path(args.out).mkdir(parents=True, exist_ok=True)
            write_summary(Path(args.out) / "summary.txt", {"error": str(exc), "exit_code": EXIT_INVALID})
        return EXIT_INVALID
    return run_parser(cp, args.jobs)


if __name__ == "__main__":
    sys.exit(main())
