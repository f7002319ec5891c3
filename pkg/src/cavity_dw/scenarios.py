"""Scenario configs, runners and deterministic serialization.

A config is one JSON document. Rates (kappa, delta_c, u0, eta and the sweep
endpoints) are oscillator-unit numbers or {"value": v, "unit": "kappa"|"omega"}.
The optional "physical" block anchors SI units; with it delta_x may be given
in metres.
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from . import gpe, two_mode, variational
from .core import (ConvergenceError, Grid, ModelParams, NumericalError, UnitSystem,
                   gaussian)
from .kernels import BACKEND

log = logging.getLogger(__name__)

SCENARIOS = ("ground_sweep", "dynamics", "ramp_up", "ramp_down", "two_mode_cr")

_RATE = {
    "oneOf": [
        {"type": "number"},
        {
            "type": "object",
            "properties": {"value": {"type": "number"}, "unit": {"enum": ["kappa", "omega"]}},
            "required": ["value", "unit"],
            "additionalProperties": False,
        },
    ]
}
_POS = {"type": "number", "exclusiveMinimum": 0}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["scenario", "params"],
    "properties": {
        "scenario": {"enum": list(SCENARIOS)},
        "description": {"type": "string"},
        "params": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kappa", "delta_c", "u0"],
            "properties": {
                "kappa": _RATE, "delta_c": _RATE, "u0": _RATE, "eta": _RATE,
                "delta_x": _POS, "g_coll": {"type": "number"},
                "n_atoms": _POS, "barrier_offset": {"type": "number"},
            },
        },
        "physical": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kappa_hz"],
            "properties": {"kappa_hz": _POS, "mass_u": _POS, "delta_x_m": _POS},
        },
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"n_points": {"type": "integer"}, "x_max": {"type": "number"}},
        },
        "time": {
            "type": "object",
            "additionalProperties": False,
            "required": ["t_final"],
            "properties": {"t_final": _POS, "dt": _POS, "snapshot_every": _POS,
                           "record_every": _POS},
        },
        "initial_state": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {"kind": {"enum": ["ground", "right_mode", "gaussian"]},
                           "center": {"type": "number"}, "width": _POS},
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "required": ["eta_start", "eta_end"],
            "properties": {"eta_start": _RATE, "eta_end": _RATE,
                           "n_points": {"type": "integer", "minimum": 2},
                           "spacing": {"enum": ["linear", "log"]},
                           "duration": _POS},
        },
        "two_mode": {
            "type": "object",
            "additionalProperties": False,
            "required": ["n_bar", "t_final"],
            "properties": {"n_bar": _POS, "t_final": _POS,
                           "n_times": {"type": "integer", "minimum": 2},
                           "n_max": {"type": "integer", "minimum": 1},
                           "initial_well": {"enum": ["left", "right"]},
                           "fixed_point": {"type": "integer", "minimum": 0},
                           "t_table_max": {"type": "integer", "minimum": 1}},
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"tol": _POS, "dtau": _POS},
        },
        "output_dir": {"type": "string"},
    },
    "allOf": [
        {"if": {"required": ["scenario"], "properties": {"scenario": {"const": "ground_sweep"}}},
         "then": {"required": ["sweep"], "properties": {"sweep": {"required": ["n_points"]}}}},
        {"if": {"required": ["scenario"], "properties": {"scenario": {"const": "dynamics"}}},
         "then": {"required": ["time", "initial_state"],
                  "properties": {"params": {"required": ["eta"]}}}},
        {"if": {"required": ["scenario"], "properties": {"scenario": {"enum": ["ramp_up", "ramp_down"]}}},
         "then": {"required": ["time", "sweep"]}},
        {"if": {"required": ["scenario"], "properties": {"scenario": {"const": "two_mode_cr"}}},
         "then": {"required": ["two_mode"], "properties": {"params": {"required": ["eta"]}}}},
    ],
}


class ConfigError(ValueError):
    """Invalid config; ``errors`` lists "path: message" strings."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class ScenarioConfig:
    scenario: str
    params: ModelParams
    grid: Grid
    time: dict = field(default_factory=dict)
    initial_state: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    two_mode: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    output_dir: str | None = None
    raw: dict = field(default_factory=dict)
    units: UnitSystem | None = None


def _reject_constant(name):
    raise ValueError(f"non-finite number {name} is not allowed")


def _path(parts) -> str:
    return "/".join(str(p) for p in parts) or "<root>"


def _rate(v, kappa):
    if isinstance(v, dict):
        return v["value"] * (kappa if v["unit"] == "kappa" else 1.0)
    return float(v)


def validate_config(text: str | dict) -> ScenarioConfig:
    """Parse and fully validate a config; raises :class:`ConfigError` with every problem found."""
    if isinstance(text, dict):
        raw = text
    else:
        try:
            raw = json.loads(text, parse_constant=_reject_constant)
        except ValueError as exc:
            raise ConfigError([f"<root>: invalid JSON: {exc}"]) from None
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = []
    for err in sorted(validator.iter_errors(raw), key=lambda e: list(map(str, e.absolute_path))):
        if err.validator == "additionalProperties":
            extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
            for key in extra:
                errors.append(f"{_path(list(err.absolute_path) + [key])}: unknown key")
        elif err.validator == "required":
            missing = err.message.split("'")[1] if "'" in err.message else err.message
            errors.append(f"{_path(list(err.absolute_path) + [missing])}: required field missing")
        else:
            errors.append(f"{_path(err.absolute_path)}: {err.message}")
    if errors:
        raise ConfigError(list(dict.fromkeys(errors)))

    pr = raw["params"]
    kappa = _rate(pr["kappa"], 1.0)
    if not kappa > 0:
        raise ConfigError(["params/kappa: must be > 0"])
    units = None
    delta_x = pr.get("delta_x")
    phys = raw.get("physical")
    if phys:
        units = UnitSystem(phys["kappa_hz"], kappa, phys.get("mass_u", 87.0))
        if "delta_x_m" in phys:
            if delta_x is not None:
                errors.append("params/delta_x: give either params/delta_x or physical/delta_x_m")
            delta_x = units.to_length(phys["delta_x_m"])
    if delta_x is None:
        errors.append("params/delta_x: required field missing (or physical/delta_x_m)")
        delta_x = 1.0
    values = dict(kappa=kappa, delta_c=_rate(pr["delta_c"], kappa), u0=_rate(pr["u0"], kappa),
                  eta=_rate(pr.get("eta", 0.0), kappa), delta_x=delta_x,
                  g_coll=pr.get("g_coll", 0.0), n_atoms=pr.get("n_atoms", 1e4),
                  barrier_offset=pr.get("barrier_offset", 0.0))
    try:
        params = ModelParams(**values)
    except ValueError as exc:
        msg = str(exc)
        errors.append(f"params/{msg.split()[0]}: {msg}")
        params = None

    g = raw.get("grid", {})
    try:
        grid = Grid(int(g.get("n_points", 1024)), float(g.get("x_max", 12.0)))
    except ValueError as exc:
        errors.append(f"grid: {exc}")
        grid = None

    sweep = dict(raw.get("sweep", {}))
    if sweep:
        sweep["eta_start"] = _rate(sweep["eta_start"], kappa)
        sweep["eta_end"] = _rate(sweep["eta_end"], kappa)
        for k in ("eta_start", "eta_end"):
            if sweep[k] < 0:
                errors.append(f"sweep/{k}: must be >= 0")
        scen = raw["scenario"]
        if scen == "ground_sweep" and not sweep["eta_end"] > sweep["eta_start"]:
            errors.append("sweep/eta_end: must exceed eta_start")
        if scen == "ground_sweep" and sweep.get("spacing") == "log" and not sweep["eta_start"] > 0:
            errors.append("sweep/eta_start: log spacing needs eta_start > 0")
        if scen == "ramp_up" and not sweep["eta_end"] > sweep["eta_start"]:
            errors.append("sweep/eta_end: ramp_up needs eta_end > eta_start")
        if scen == "ramp_down" and not sweep["eta_end"] < sweep["eta_start"]:
            errors.append("sweep/eta_end: ramp_down needs eta_end < eta_start")
    tm = raw.get("time", {})
    if tm and tm.get("dt", gpe.DEFAULT_DT) > tm["t_final"]:
        errors.append("time/dt: must not exceed t_final")
    tw = raw.get("two_mode", {})
    if tw and "n_max" in tw and tw["n_max"] < tw["n_bar"] + 10 * math.sqrt(tw["n_bar"]):
        errors.append("two_mode/n_max: must be >= n_bar + 10 sqrt(n_bar)")
    if errors:
        raise ConfigError(errors)
    return ScenarioConfig(scenario=raw["scenario"], params=params, grid=grid, time=dict(tm),
                          initial_state=dict(raw.get("initial_state", {})), sweep=sweep,
                          two_mode=dict(tw), solver=dict(raw.get("solver", {})),
                          output_dir=raw.get("output_dir"), raw=raw, units=units)


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"<file>: cannot read {path}: {exc}"]) from None
    return validate_config(text)


# -- bundled configs -----------------------------------------------------------

def bundled_configs() -> dict:
    root = resources.files("cavity_dw") / "configs"
    return {p.name: p for p in sorted(root.iterdir(), key=lambda p: p.name) if p.name.endswith(".json")}


def resolve_config_path(name: str):
    """A filesystem path, or the name of a bundled config (with or without .json)."""
    path = Path(name)
    if path.exists():
        return path
    bundled = bundled_configs()
    key = name if name.endswith(".json") else name + ".json"
    if key in bundled:
        return bundled[key]
    return path


# -- serialization -------------------------------------------------------------

def format_csv(header, columns) -> str:
    """Comma-separated, '%.17g' numbers, header row, LF line endings."""
    cols = [np.asarray(c, dtype=float) for c in columns]
    if len(header) != len(cols):
        raise ValueError("header and columns differ in length")
    n = len(cols[0]) if cols else 0
    lines = [",".join(header)]
    for i in range(n):
        lines.append(",".join("%.17g" % c[i] for c in cols))
    return "\n".join(lines) + "\n"


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class _Writer:
    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.files = []
        out_dir.mkdir(parents=True, exist_ok=True)

    def csv(self, name, header, columns):
        path = self.out_dir / name
        with open(path, "w", newline="\n") as fh:
            fh.write(format_csv(header, columns))
        self.files.append(name)

    def json(self, name, obj):
        path = self.out_dir / name
        with open(path, "w", newline="\n") as fh:
            fh.write(json.dumps(obj, indent=2, sort_keys=True) + "\n")
        self.files.append(name)


@dataclass
class RunOutcome:
    out_dir: Path
    files: list
    manifest: dict
    ok: bool


# -- runners -------------------------------------------------------------------

def _solver_kw(cfg):
    return {"tol": cfg.solver.get("tol", 1e-9), "dtau": cfg.solver.get("dtau", gpe.DEFAULT_DTAU)}


def _sweep_etas(sw):
    n = sw["n_points"]
    if sw.get("spacing", "linear") == "log":
        return np.geomspace(sw["eta_start"], sw["eta_end"], n)
    return np.linspace(sw["eta_start"], sw["eta_end"], n)


def _run_ground_sweep(cfg, w, seed_grid, failures):
    etas = _sweep_etas(cfg.sweep)
    res = variational.sweep_pump(cfg.params, etas, cfg.grid, seed_grid=seed_grid,
                                 gpe_tol=_solver_kw(cfg)["tol"])
    cols = [[] for _ in range(7)]
    for row in res.rows:
        if row.error:
            failures.append(f"eta={row.eta:.17g}: {row.error}")
            continue
        for i, b in enumerate(row.branches):
            for c, v in zip(cols, (row.eta, i, b.sigma, b.x0, b.energy, b.n_ss, row.n_ss_gpe)):
                c.append(v)
    w.csv("ground_sweep.csv", ["eta", "branch_id", "sigma", "x0", "E", "n_ss_ansatz", "n_ss_gpe"], cols)
    return {"n_eta": len(etas)}


def _initial_state(cfg, p):
    kind = cfg.initial_state.get("kind", "ground")
    if kind == "gaussian":
        return gaussian(cfg.grid, cfg.initial_state.get("center", 2.0),
                        cfg.initial_state.get("width", 0.8))
    if kind == "right_mode":
        return gpe.localized_modes(p, cfg.grid, **_solver_kw(cfg))[1]
    return gpe.ground_state_imaginary_time(p, cfg.grid, **_solver_kw(cfg)).psi


def _write_propagation(w, res, with_eta, snapshots=True):
    header = ["t", "Z", "n_ss", "E"]
    cols = [res.times, res.inversion, res.photon_number, res.energy]
    if with_eta:
        header.insert(1, "eta")
        cols.insert(1, res.eta)
    w.csv("dynamics.csv", header, cols)
    if snapshots:
        for i, (t, psi) in enumerate(res.snapshots):
            w.csv(f"snapshot_{i:04d}.csv", ["x", "abs_psi"], [psi.grid.x, np.abs(psi.values)])


def _evolve_and_write(cfg, w, psi0, p, schedule, with_eta):
    tm = cfg.time
    try:
        res = gpe.evolve(psi0, tm["t_final"], tm.get("dt", gpe.DEFAULT_DT), p, schedule=schedule,
                         snapshot_every=tm.get("snapshot_every"),
                         record_every=tm.get("record_every"))
    except NumericalError as exc:
        if exc.partial is not None:
            _write_propagation(w, exc.partial, with_eta)
        raise
    _write_propagation(w, res, with_eta)
    return {"steps": res.steps, "norm_error": res.norm_error,
            "min_Z": float(res.inversion.min()), "max_Z": float(res.inversion.max())}


def _run_dynamics(cfg, w, seed_grid, failures):
    psi0 = _initial_state(cfg, cfg.params)
    return _evolve_and_write(cfg, w, psi0, cfg.params, None, False)


def ramp_schedule(sweep, t_final):
    duration = sweep.get("duration", t_final)
    knots = [(0.0, sweep["eta_start"]), (duration, sweep["eta_end"])]
    if t_final > duration:
        knots.append((t_final, sweep["eta_end"]))
    return knots


def _run_ramp(cfg, w, seed_grid, failures):
    sw = cfg.sweep
    p0 = cfg.params.replace(eta=sw["eta_start"])
    psi0 = gpe.ground_state_imaginary_time(p0, cfg.grid, **_solver_kw(cfg)).psi
    sched = ramp_schedule(sw, cfg.time["t_final"])
    summary = _evolve_and_write(cfg, w, psi0, p0, sched, True)
    summary["schedule"] = sched
    return summary


def _run_two_mode(cfg, w, seed_grid, failures):
    tw = cfg.two_mode
    p = cfg.params
    models = two_mode.self_consistent_model(p)
    if not models:
        raise NumericalError("two-mode model has no self-consistent solution: "
                             + "; ".join(f"{g:g}: {why}" for g, why in models.skipped))
    idx = tw.get("fixed_point", 0)
    if idx >= len(models):
        raise NumericalError(f"fixed point {idx} requested, only {len(models)} found")
    model = models[idx]
    n_bar = tw["n_bar"]
    times = np.linspace(0.0, tw["t_final"], tw.get("n_times", 20001))
    sig = two_mode.collapse_revival_signal(n_bar, times, model, tw.get("n_max"),
                                           tw.get("initial_well", "right"))
    env = np.abs(sig)
    w.csv("collapse_revival.csv", ["t", "Z_MB"], [times, sig.real])
    n_tab = np.arange(tw.get("t_table_max", two_mode.default_n_max(n_bar)) + 1)
    w.csv("t_table.csv", ["n", "t_n"], [n_tab, model.t_of_n(n_tab)])
    t_r = two_mode.revival_time(n_bar, model)
    t_rev, h_rev = two_mode.first_revival(times, env)
    c = model.coeffs
    meta = {
        "n_bar": n_bar,
        "revival_time": t_r if math.isfinite(t_r) else None,
        "collapse_time": two_mode.collapse_time(times, env),
        "observed_revival": [t_rev, h_rev],
        "coefficients": {k: getattr(c, k) for k in ("e0", "e1", "j0", "j1", "s0", "s1",
                                                    "sigma", "x0", "n_ss")},
        "fixed_points": [m.coeffs.n_ss for m in models],
    }
    w.json("two_mode.json", meta)
    return {"revival_time": meta["revival_time"], "collapse_time": meta["collapse_time"]}


_RUNNERS = {
    "ground_sweep": _run_ground_sweep,
    "dynamics": _run_dynamics,
    "ramp_up": _run_ramp,
    "ramp_down": _run_ramp,
    "two_mode_cr": _run_two_mode,
}


def run_scenario(cfg: ScenarioConfig, out_dir=None, seed_grid: str = "coarse") -> RunOutcome:
    """Run one scenario, write its data files and ``manifest.json``.

    A numerical failure still writes whatever was computed plus a manifest
    with ``status: "failed"``; the exception is then re-raised.
    """
    out = Path(out_dir or cfg.output_dir or f"out/{cfg.scenario}")
    w = _Writer(out)
    failures = []
    t0 = time.perf_counter()
    error = None
    summary = {}
    try:
        summary = _RUNNERS[cfg.scenario](cfg, w, seed_grid, failures) or {}
    except (NumericalError, ConvergenceError) as exc:
        error = exc
        failures.append(f"{type(exc).__name__}: {exc}")
    manifest = {
        "artifact_version": __version__,
        "backend": BACKEND,
        "config": cfg.raw,
        "scenario": cfg.scenario,
        "seed_grid": seed_grid,
        "status": "failed" if failures else "ok",
        "failures": failures,
        "summary": summary,
        "wall_time_s": time.perf_counter() - t0,
        "outputs": {name: sha256_file(out / name) for name in w.files},
    }
    if cfg.units is not None:
        manifest["time_unit_s"] = cfg.units.time_unit
        manifest["length_unit_m"] = cfg.units.length_unit
    with open(out / "manifest.json", "w", newline="\n") as fh:
        fh.write(json.dumps(manifest, indent=2, sort_keys=True, default=float) + "\n")
    if error is not None:
        raise error
    if failures:
        raise NumericalError("; ".join(failures))
    return RunOutcome(out, w.files, manifest, True)


def verify_manifest(out_dir) -> list:
    """Names of outputs whose checksum no longer matches the manifest."""
    out_dir = Path(out_dir)
    manifest = json.loads((out_dir / "manifest.json").read_text())
    return [name for name, digest in manifest["outputs"].items()
            if sha256_file(out_dir / name) != digest]
