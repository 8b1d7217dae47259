"""Command-line driver: config parsing, presets, run orchestration and writers.

Usage::

    glmcurl --preset robust-stability-coarse --glm off --output runs/off
    glmcurl --config my.cfg --print-config
    glmcurl compare runs/on runs/off

Heavy modules are imported lazily so ``--threads`` can set the worker count
before the compiled kernels load.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

log = logging.getLogger("glmcurl")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_IO = 4
OUTPUT_ROOT_ENV = "GLMCURL_OUTPUT_ROOT"

FAMILIES = ("A", "B", "D", "P")


# --------------------------------------------------------------------------
# config schema

@dataclass(frozen=True)
class Key:
    default: object
    kind: str
    doc: str
    choices: tuple = ()


def _family_keys():
    out = {}
    for fam in FAMILIES:
        for base in ("a_c", "a_d", "eps_c", "eps_d"):
            out[f"{base}_{fam}"] = Key(None, "float?", f"{base} for the {fam} family; empty inherits {base}")
    return out


SCHEMA: dict[str, Key] = {
    # scenario and grid
    "scenario": Key("robust_stability", "choice", "initial data generator",
                    ("robust_stability", "toy_curl_free", "toy_pure_curl_error", "induction_wave",
                     "rotating_masses", "external_file")),
    "system": Key("foccz4", "choice", "evolved system for external_file data",
                  ("foccz4", "toy_homogeneous", "toy_nonhomogeneous", "induction_glm")),
    "initial_data": Key("", "str", "binary initial-data file for external_file"),
    "nx": Key(20, "int", "cells along x"),
    "ny": Key(20, "int", "cells along y"),
    "nz": Key(20, "int", "cells along z"),
    "lower": Key((-0.5, -0.5, -0.5), "vec3", "lower domain corner"),
    "upper": Key((0.5, 0.5, 0.5), "vec3", "upper domain corner"),
    "boundary": Key(("periodic",) * 3, "bc3", "periodic or extrapolate, one value or one per axis"),
    "seed": Key(0, "int", "perturbation seed"),
    "perturbation": Key(0.0, "float", "uniform perturbation amplitude added to every component"),
    # time stepping
    "t_end": Key(1.0, "float", "final time"),
    "cfl": Key(0.25, "float", "CFL number, dt = cfl h_min / v_max"),
    "dt": Key(0.0, "float", "fixed time step; 0 uses the CFL condition"),
    "sigma_ko": Key(0.05, "float", "Kreiss-Oliger dissipation strength"),
    "projection": Key(False, "bool", "rescale det gt to 1 and remove tr At after each step"),
    "divergence_limit": Key(1e6, "float", "field magnitude that stops a run as diverged"),
    # outputs
    "output_every": Key(1.0, "float", "constraint report cadence"),
    "snapshot_every": Key(0.0, "float", "VTK snapshot cadence; 0 writes only the final state"),
    "snapshot_fields": Key(("auto",), "list", "components written to VTK; 'all' for every one, "
                                                "'auto' for a per-system default"),
    "cut_axes": Key(("x",), "list", "axes of 1D cuts through the domain centre; empty for none"),
    "cut_fields": Key(("auto",), "list", "components sampled in the cuts; 'all' and 'auto' as above"),
    # FO-CCZ4
    "glm": Key(True, "bool", "curl and divergence cleaning on or off"),
    "slicing": Key("harmonic", "choice", "lapse condition", ("harmonic", "one_plus_log")),
    "s": Key(0, "int", "shift evolution toggle (0 or 1)"),
    "f": Key(0.75, "float", "gamma-driver coefficient"),
    "mu": Key(0.2, "float", "gamma-driver mu"),
    "eta": Key(0.0, "float", "gamma-driver damping"),
    "c": Key(0.0, "float", "switch for the Ricci-like terms of the Z4 coupling"),
    "e": Key(1.0, "float", "gauge cleaning speed"),
    "kappa1": Key(0.0, "float", "Z4 damping kappa1"),
    "kappa2": Key(0.0, "float", "Z4 damping kappa2"),
    "kappa3": Key(0.0, "float", "Z4 damping kappa3"),
    "a_c": Key(1.5, "float", "curl cleaning speed"),
    "a_d": Key(2.0, "float", "divergence cleaning speed"),
    "eps_c": Key(1.0, "float", "curl cleaning damping"),
    "eps_d": Key(1.0, "float", "divergence cleaning damping"),
    **_family_keys(),
    # toy system
    "c0": Key(1.0, "float", "toy stiffness"),
    "a_b": Key(0.0, "float", "toy Burgers-vector cleaning speed"),
    "eps_b": Key(0.0, "float", "toy Burgers-vector cleaning damping"),
    "source": Key("none", "choice", "toy source", ("none", "linear_relaxation")),
    "tau_relax": Key(1.0, "float", "toy relaxation time"),
    "toy_amplitude": Key(1e-2, "float", "pure_curl_error vortex amplitude"),
    "toy_width": Key(0.0, "float", "pure_curl_error vortex width; 0 picks a tenth of the box"),
    # induction
    "light_speed": Key(1.0, "float", "induction light speed"),
    "mode": Key((1.0, 0.0, 0.0), "vec3", "plane-wave mode numbers"),
    "amp_t": Key(1.0, "float", "transverse amplitude"),
    "amp_l": Key(0.0, "float", "longitudinal amplitude"),
    # rotating masses
    "A_L": Key(5e-4, "float", "left Gaussian amplitude"),
    "A_R": Key(5e-4, "float", "right Gaussian amplitude"),
    "sigma_L": Key(1.0, "float", "left Gaussian width"),
    "sigma_R": Key(1.0, "float", "right Gaussian width"),
    "x_L": Key((-2.0, 0.0, 0.0), "vec3", "left Gaussian centre"),
    "x_R": Key((2.0, 0.0, 0.0), "vec3", "right Gaussian centre"),
    "omega": Key((0.0, 0.0, 0.2), "vec3", "angular velocity"),
    "r_cut": Key(5.0, "float", "velocity cutoff radius"),
    "smooth_cells": Key(2.0, "float", "width of the velocity cutoff taper in cells"),
}

PRESETS = {
    "robust-stability-coarse": {
        "values": dict(scenario="robust_stability", nx=20, ny=20, nz=20, lower=(-0.5,) * 3, upper=(0.5,) * 3,
                       perturbation=1e-6, t_end=100.0, cfl=0.5, output_every=1.0, e=2.0, a_c=1.5, a_d=2.0,
                       eps_c=1.0, eps_d=1.0, c=0.0, kappa1=0.0, s=0, slicing="harmonic"),
        "deviations": ["grid 20^3 with 4th-order finite differences instead of high-order DG",
                       "t_end 100 instead of 1000", "CFL 0.5"],
    },
    "rotating-masses-desk": {
        "values": dict(scenario="rotating_masses", nx=80, ny=80, nz=8, lower=(-40.0, -40.0, -4.0),
                       upper=(40.0, 40.0, 4.0), t_end=50.0, cfl=0.5, output_every=1.0, e=2.0, a_c=1.5,
                       a_d=1.5, eps_c=1.0, eps_d=1.0, c=0.0, s=1, slicing="harmonic",
                       cut_fields=("ln_alpha", "K", "tau")),
        "deviations": ["domain [-40,40]^2 x [-4,4] on 80^2 x 8 cells", "t_end 50",
                       "velocity cutoff smoothed over 2 cells", "periodic outer boundary",
                       "gauge chosen here: gamma-driver shift (s = 1) with harmonic lapse"],
    },
    "tov-ingest": {
        "values": dict(scenario="external_file", system="foccz4", e=1.2, a_c=0.1, a_d=0.1,
                       eps_c=5.0, eps_d=5.0, kappa1=0.03, c=0.0, output_every=1.0),
        "deviations": ["star data must be supplied through initial_data"],
    },
    "toy-pure-curl-error": {
        "values": dict(scenario="toy_pure_curl_error", nx=32, ny=32, nz=1, lower=(-1.0, -1.0, -0.5),
                       upper=(1.0, 1.0, 0.5), t_end=10.0, output_every=0.5, a_c=1.5, a_d=1.5,
                       eps_c=1.0, eps_d=1.0, c0=0.0, snapshot_fields=("J1", "J2"), cut_fields=("J2",)),
        "deviations": [],
    },
    "induction-wave": {
        "values": dict(scenario="induction_wave", nx=32, ny=32, nz=32, lower=(0.0,) * 3, upper=(1.0,) * 3,
                       t_end=1.0, output_every=0.1, a_d=1.0, eps_d=0.0, mode=(1.0, 1.0, 0.0),
                       snapshot_fields=("B3",), cut_fields=("B3",)),
        "deviations": [],
    },
}


class ConfigError(ValueError):
    pass


def _parse_value(name: str, raw: str):
    spec = SCHEMA[name]
    text = raw.strip()
    try:
        if spec.kind == "int":
            return int(text)
        if spec.kind == "float":
            return float(text)
        if spec.kind == "float?":
            return None if text == "" else float(text)
        if spec.kind == "bool":
            low = text.lower()
            if low in ("1", "true", "on", "yes"):
                return True
            if low in ("0", "false", "off", "no"):
                return False
            raise ValueError(text)
        if spec.kind == "vec3":
            parts = [float(p) for p in text.replace(",", " ").split()]
            if len(parts) != 3:
                raise ValueError(text)
            return tuple(parts)
        if spec.kind == "bc3":
            parts = [p for p in text.replace(",", " ").split()]
            if len(parts) == 1:
                parts = parts * 3
            if len(parts) != 3 or any(p not in ("periodic", "extrapolate") for p in parts):
                raise ValueError(text)
            return tuple(parts)
        if spec.kind == "list":
            return tuple(p for p in text.replace(",", " ").split())
        if spec.kind == "choice":
            if text not in spec.choices:
                raise ValueError(text)
            return text
        return text
    except ValueError:
        extra = f" (one of {', '.join(spec.choices)})" if spec.choices else ""
        raise ConfigError(f"{name}: cannot read {raw.strip()!r} as {spec.kind}{extra}") from None


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse ``key = value`` lines with ``#`` comments into typed values."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        out[key] = _parse_value(key, value)
    return out


def _format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "on" if v else "off"
    if isinstance(v, tuple):
        return ", ".join(_format_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def format_config(values: dict) -> str:
    lines = []
    for key, spec in SCHEMA.items():
        lines.append(f"{key} = {_format_value(values[key])}  # {spec.doc}")
    return "\n".join(lines) + "\n"


@dataclass
class RunConfig:
    values: dict
    preset: str | None = None
    deviations: list = field(default_factory=list)

    def __getitem__(self, key):
        return self.values[key]

    def validate(self) -> None:
        v = self.values
        for name in ("nx", "ny", "nz"):
            if v[name] < 1:
                raise ConfigError(f"{name} must be positive")
        for name in ("t_end", "perturbation", "output_every", "snapshot_every", "dt", "sigma_ko"):
            if v[name] < 0:
                raise ConfigError(f"{name} must be nonnegative")
        if not v["cfl"] > 0:
            raise ConfigError("cfl must be positive")
        if v["output_every"] == 0:
            raise ConfigError("output_every must be positive")
        if not v["divergence_limit"] > 0:
            raise ConfigError("divergence_limit must be positive")
        if any(a not in ("x", "y", "z") for a in v["cut_axes"]):
            raise ConfigError("cut_axes entries must be x, y or z")
        if v["scenario"] == "external_file" and not v["initial_data"]:
            raise ConfigError("external_file needs initial_data")
        if v["s"] not in (0, 1):
            raise ConfigError("s must be 0 or 1")
        if v["projection"] and self.system_kind != "foccz4":
            raise ConfigError("projection applies to FO-CCZ4 only")
        names = _component_names(self.system_kind, self.with_tau)
        for key in ("snapshot_fields", "cut_fields"):
            for name in v[key]:
                if name not in ("all", "auto") and name not in names:
                    raise ConfigError(f"{key}: {self.system_kind} has no component {name!r}")

    @property
    def system_kind(self) -> str:
        sc = self.values["scenario"]
        if sc in ("robust_stability", "rotating_masses"):
            return "foccz4"
        if sc.startswith("toy_"):
            return "toy_homogeneous"
        if sc == "induction_wave":
            return "induction_glm"
        return self.values["system"]

    @property
    def with_tau(self) -> bool:
        return self.values["scenario"] == "rotating_masses"


AUTO_FIELDS = {
    "foccz4": ("ln_alpha", "K"),
    "toy_homogeneous": ("rho", "J1", "J2"),
    "toy_nonhomogeneous": ("rho", "J1", "J2"),
    "induction_glm": ("B1", "B2", "B3"),
}


def resolve_fields(kind: str, fields) -> tuple:
    """Expand 'auto' to the per-system default; 'all' is left for the writers."""
    out = []
    for name in fields:
        out.extend(AUTO_FIELDS[kind] if name == "auto" else (name,))
    return tuple(dict.fromkeys(out))


def _component_names(kind, with_tau):
    from .state import component_names
    return component_names(kind, with_tau)


def build_config(preset: str | None = None, config_path: str | None = None, overrides: dict | None = None,
                 validate: bool = True) -> RunConfig:
    """Defaults, then preset, then config file, then explicit overrides."""
    values = {k: s.default for k, s in SCHEMA.items()}
    deviations = []
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; available: {', '.join(PRESETS)}")
        values.update(PRESETS[preset]["values"])
        deviations = list(PRESETS[preset]["deviations"])
    if config_path is not None:
        try:
            text = Path(config_path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {config_path}: {exc}") from None
        values.update(parse_config_text(text, str(config_path)))
    values.update(overrides or {})
    cfg = RunConfig(values, preset, deviations)
    if validate:
        cfg.validate()
    return cfg


# --------------------------------------------------------------------------
# building the run

def _grid(cfg: RunConfig):
    from .state import GridSpec
    v = cfg.values
    return GridSpec((v["nx"], v["ny"], v["nz"]), v["lower"], v["upper"], v["boundary"])


def _ccz4_params(cfg: RunConfig):
    from .state import CCZ4Params, CleaningParams
    v = cfg.values
    cleaning = {}
    for fam in FAMILIES:
        vals = [v[f"{b}_{fam}"] if v[f"{b}_{fam}"] is not None else v[b] for b in ("a_c", "a_d", "eps_c", "eps_d")]
        cleaning[fam] = CleaningParams(*vals)
    return CCZ4Params(slicing=v["slicing"], s=v["s"], f=v["f"], mu=v["mu"], eta=v["eta"], c=v["c"], e=v["e"],
                      kappa1=v["kappa1"], kappa2=v["kappa2"], kappa3=v["kappa3"], glm_enabled=v["glm"],
                      cleaning=cleaning)


def _toy_params(cfg: RunConfig):
    from .state import ToyParams
    v = cfg.values
    p = ToyParams(c0=v["c0"], a_c=v["a_c"], a_d=v["a_d"], a_b=v["a_b"], eps_c=v["eps_c"], eps_d=v["eps_d"],
                  eps_b=v["eps_b"], source=v["source"], tau_relax=v["tau_relax"])
    return p if v["glm"] else p.without_cleaning()


def _induction_params(cfg: RunConfig):
    from .state import GLMParams
    v = cfg.values
    if not v["glm"]:
        return GLMParams(v["light_speed"], 0.0, 0.0)
    return GLMParams(v["light_speed"], v["a_d"], v["eps_d"])


def build_initial(cfg: RunConfig):
    """Return ``(snapshot, matter, velocity, notes)`` for the configured scenario."""
    from . import scenarios as sc
    from .systems import make_system
    v = cfg.values
    grid = _grid(cfg)
    notes = []
    matter = velocity = None
    scen = v["scenario"]
    if scen == "robust_stability":
        snap = sc.minkowski_init(grid, _ccz4_params(cfg))
    elif scen == "rotating_masses":
        rp = sc.RotatingMassesParams(v["A_L"], v["A_R"], v["sigma_L"], v["sigma_R"], v["x_L"], v["x_R"],
                                     v["omega"], v["r_cut"])
        snap, matter, velocity = sc.rotating_masses_init(grid, _ccz4_params(cfg), rp, v["smooth_cells"])
    elif scen.startswith("toy_"):
        variant = scen[4:]
        snap = sc.toy_init(grid, variant, _toy_params(cfg), v["toy_amplitude"], v["toy_width"] or None)
    elif scen == "induction_wave":
        snap = sc.induction_wave_init(grid, _induction_params(cfg), v["mode"], v["amp_t"], v["amp_l"])
    else:
        kind = v["system"]
        params = {"foccz4": _ccz4_params, "induction_glm": _induction_params}.get(kind, _toy_params)(cfg)
        system = make_system(kind, params)
        snap, drift = sc.load_initial_data(v["initial_data"], system, grid)
        if drift > 1e-3:
            notes.append(f"conformal determinant drift {drift:.3e} in initial data")
            log.warning("conformal determinant drift %.3e in initial data", drift)
    if v["perturbation"] > 0:
        snap = sc.perturb(snap, v["seed"], v["perturbation"])
    snap.check_finite()
    return snap, matter, velocity, notes


# --------------------------------------------------------------------------
# writers

def _fmt(x: float) -> str:
    return repr(float(x))


class CSVWriter:
    def __init__(self, path: Path):
        self.path = path
        self.fh = open(path, "w", newline="", encoding="utf-8")
        self.header = None

    def write(self, report):
        if self.header is None:
            self.header = report.header()
            self.fh.write(",".join(self.header) + "\n")
        self.fh.write(",".join(_fmt(x) for x in report.row()) + "\n")
        self.fh.flush()

    def close(self):
        self.fh.close()


def write_vtk(path: Path, grid, snapshot_data, names, fields, title: str) -> None:
    """Legacy ASCII VTK STRUCTURED_POINTS with one FIELD array per component."""
    nx, ny, nz = grid.shape
    h = grid.spacing
    origin = [grid.lower[d] + 0.5 * h[d] for d in range(3)]
    chosen = list(names) if "all" in fields else list(fields)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(title.replace("\n", " ")[:255] + "\n")
        fh.write("ASCII\nDATASET STRUCTURED_POINTS\n")
        fh.write(f"DIMENSIONS {nx} {ny} {nz}\n")
        fh.write("ORIGIN " + " ".join(_fmt(o) for o in origin) + "\n")
        fh.write("SPACING " + " ".join(_fmt(s) for s in h) + "\n")
        fh.write(f"POINT_DATA {nx * ny * nz}\n")
        fh.write(f"FIELD FieldData {len(chosen)}\n")
        for name in chosen:
            arr = snapshot_data[names.index(name)].transpose(2, 1, 0).ravel()
            fh.write(f"{name} 1 {arr.size} double\n")
            for start in range(0, arr.size, 6):
                fh.write(" ".join(_fmt(x) for x in arr[start:start + 6]) + "\n")


def read_vtk_header(path: Path) -> dict:
    """Minimal self-check reader: dimensions, spacing and array names with sizes."""
    info = {"arrays": {}}
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if not lines[0].startswith("# vtk DataFile"):
        raise ValueError("not a legacy VTK file")
    i = 0
    while i < len(lines):
        tok = lines[i].split()
        if tok and tok[0] == "DIMENSIONS":
            info["dimensions"] = tuple(int(t) for t in tok[1:4])
        elif tok and tok[0] == "SPACING":
            info["spacing"] = tuple(float(t) for t in tok[1:4])
        elif tok and tok[0] == "ORIGIN":
            info["origin"] = tuple(float(t) for t in tok[1:4])
        elif tok and tok[0] == "FIELD":
            for _ in range(int(tok[2])):
                i += 1
                name, ncomp, n, _dtype = lines[i].split()
                count = int(ncomp) * int(n)
                vals = []
                while len(vals) < count:
                    i += 1
                    vals.extend(float(t) for t in lines[i].split())
                info["arrays"][name] = vals
        i += 1
    return info


class CutWriter:
    """1D samples along an axis through the grid node nearest the domain centre."""

    AXES = {"x": 0, "y": 1, "z": 2}

    def __init__(self, path: Path, axis: str, grid, names, fields):
        self.axis = self.AXES[axis]
        self.grid = grid
        self.names = list(names)
        self.fields = list(names) if "all" in fields else list(fields)
        self.fh = open(path, "w", newline="", encoding="utf-8")
        self.fh.write(",".join(["t", axis] + self.fields) + "\n")
        self.centre = [n // 2 for n in grid.shape]

    def write(self, t, q):
        coord = self.grid.axis(self.axis)
        idx = list(self.centre)
        for n in range(self.grid.shape[self.axis]):
            idx[self.axis] = n
            row = [_fmt(t), _fmt(coord[n])]
            row += [_fmt(q[self.names.index(f)][tuple(idx)]) for f in self.fields]
            self.fh.write(",".join(row) + "\n")
        self.fh.flush()

    def close(self):
        self.fh.close()


# --------------------------------------------------------------------------
# run and compare

def run(cfg: RunConfig, output: Path, threads: int | None = None) -> int:
    """Execute a configured run; returns the process exit status."""
    from . import __version__
    from .discretization import TimeController, evolve
    from .state import StateError

    t0 = time.perf_counter()
    try:
        output.mkdir(parents=True, exist_ok=True)
        probe = output / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        log.error("output directory %s is not writable: %s", output, exc)
        return EXIT_IO
    try:
        snap, matter, velocity, notes = build_initial(cfg)
    except StateError as exc:
        log.error("initial data rejected: %s", exc)
        return EXIT_CONFIG
    v = cfg.values
    grid = snap.grid
    names = list(snap.layout.names)
    snap_fields = resolve_fields(snap.layout.kind, v["snapshot_fields"])
    cut_fields = resolve_fields(snap.layout.kind, v["cut_fields"])
    ctrl = TimeController(t_end=v["t_end"], cfl=v["cfl"], dt_fixed=v["dt"] or None,
                          output_every=v["output_every"], snapshot_every=v["snapshot_every"] or None)
    csvw = CSVWriter(output / "constraints.csv")
    cuts = [CutWriter(output / f"cuts_{ax}.csv", ax, grid, names, cut_fields) for ax in v["cut_axes"]]
    nsnap = [0]

    def on_snapshot(t, q):
        if v["snapshot_every"] > 0:
            write_vtk(output / f"snapshot_{nsnap[0]:04d}.vtk", grid, q, names, snap_fields,
                      f"{snap.layout.kind} t={t!r}")
            nsnap[0] += 1
        for c in cuts:
            c.write(t, q)

    try:
        result = evolve(snap, snap.layout, ctrl, sigma_ko=v["sigma_ko"], projection=v["projection"],
                        matter=matter, velocity=velocity, divergence_limit=v["divergence_limit"],
                        on_report=csvw.write,
                        on_snapshot=on_snapshot if v["snapshot_every"] > 0 else None)
        final = result.snapshot
        write_vtk(output / "final.vtk", grid, final.data, names, snap_fields,
                  f"{snap.layout.kind} t={final.time!r}" + (" diverged" if result.diverged else ""))
        if v["snapshot_every"] == 0 or result.diverged:
            for c in cuts:
                c.write(final.time, final.data)
    finally:
        csvw.close()
        for c in cuts:
            c.close()
    status = "diverged" if result.diverged else "completed"
    meta = {
        "status": status,
        "message": result.message,
        "version": __version__,
        "seed": v["seed"],
        "preset": cfg.preset,
        "desk_scale_deviations": cfg.deviations,
        "notes": notes,
        "system": snap.layout.kind,
        "steps": result.steps,
        "final_time": final.time,
        "threads": threads,
        "wall_time_s": round(time.perf_counter() - t0, 3),
        "config": {k: _format_value(x) for k, x in v.items()},
    }
    (output / "run.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    if result.diverged:
        log.error("run diverged: %s", result.message)
        return EXIT_DIVERGED
    log.info("completed %d steps to t = %g in %.1f s", result.steps, final.time, meta["wall_time_s"])
    return EXIT_OK


def read_constraints(path) -> tuple[list[str], list[list[float]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path} is empty")
    return rows[0], [[float(x) for x in r] for r in rows[1:] if r]


def _interp(ts, ys, t):
    """Linear interpolation of the samples ``(ts, ys)`` at ``t``; None outside the range."""
    if t < ts[0] or t > ts[-1]:
        return None
    for i in range(len(ts) - 1):
        if ts[i] <= t <= ts[i + 1]:
            if ts[i + 1] == ts[i]:
                return ys[i]
            w = (t - ts[i]) / (ts[i + 1] - ts[i])
            return ys[i] + w * (ys[i + 1] - ys[i])
    return ys[-1]


def compare(dir_a, dir_b) -> tuple[list[str], list[list[float]]]:
    """Ratios a/b of every shared norm column at the times of run a.

    Run b is linearly interpolated onto those times; times outside b's range
    are skipped. 0/0 counts as 1.
    """
    ha, ra = read_constraints(Path(dir_a) / "constraints.csv")
    hb, rb = read_constraints(Path(dir_b) / "constraints.csv")
    cols = [c for c in ha[1:] if c in hb]
    tb = [r[0] for r in rb]
    out = []
    for row in ra:
        t = row[0]
        if not rb:
            break
        line = [t]
        for col in cols:
            a = row[ha.index(col)]
            b = _interp(tb, [r[hb.index(col)] for r in rb], t)
            if b is None:
                line = None
                break
            line.append(1.0 if a == b else (a / b if b != 0 else math.inf))
        if line is not None:
            out.append(line)
    return ["t"] + cols, out


# --------------------------------------------------------------------------
# entry point

def _run_parser():
    p = argparse.ArgumentParser(prog="glmcurl", description="GLM curl-cleaning evolution runs.",
                                epilog="Use 'glmcurl compare A B' to compare two run directories.")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--preset", choices=sorted(PRESETS), help="built-in experiment setup")
    p.add_argument("--glm", choices=("on", "off"), help="force cleaning on or off")
    p.add_argument("--resolution", type=int, help="cells along every axis with more than one cell")
    p.add_argument("--t-end", type=float, dest="t_end", help="final time")
    p.add_argument("--seed", type=int, help="perturbation seed")
    p.add_argument("--output", help=f"output directory (default ${OUTPUT_ROOT_ENV}/<preset or run>)")
    p.add_argument("--threads", type=int, help="worker threads for the compiled kernels")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one config key")
    p.add_argument("--print-config", action="store_true", help="print the effective config and exit")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _overrides(args, base: dict) -> dict:
    out = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, val = item.split("=", 1)
        k = k.strip()
        if k not in SCHEMA:
            raise ConfigError(f"unknown key {k!r}")
        out[k] = _parse_value(k, val)
    if args.glm is not None:
        out["glm"] = args.glm == "on"
    if args.t_end is not None:
        out["t_end"] = args.t_end
    if args.seed is not None:
        out["seed"] = args.seed
    if args.resolution is not None:
        merged = dict(base, **out)
        for ax in ("nx", "ny", "nz"):
            if merged[ax] > 1:
                out[ax] = args.resolution
    return out


def _compare_main(argv) -> int:
    p = argparse.ArgumentParser(prog="glmcurl compare", description="Norm ratios a/b of two runs.")
    p.add_argument("run_a")
    p.add_argument("run_b")
    p.add_argument("--columns", default="L2", help="norm suffixes to show: L1, L2, Linf or all")
    args = p.parse_args(argv)
    try:
        header, rows = compare(args.run_a, args.run_b)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    keep = [0] + [i for i, h in enumerate(header) if i and (args.columns == "all" or h.endswith("_" + args.columns))]
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow([header[i] for i in keep])
    for r in rows:
        w.writerow([f"{r[i]:.6g}" for i in keep])
    return EXIT_OK


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0] == "compare":
        return _compare_main(argv[1:])
    args = _run_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.threads is not None:
        if args.threads < 1:
            print("error: --threads must be positive", file=sys.stderr)
            return EXIT_CONFIG
        if "numba" in sys.modules and os.environ.get("NUMBA_NUM_THREADS") != str(args.threads):
            import numba
            numba.set_num_threads(min(args.threads, numba.config.NUMBA_NUM_THREADS))
        os.environ["NUMBA_NUM_THREADS"] = str(args.threads)
    try:
        base = build_config(args.preset, args.config, validate=False)
        cfg = build_config(args.preset, args.config, _overrides(args, base.values))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.print_config:
        sys.stdout.write(format_config(cfg.values))
        return EXIT_OK
    if args.output:
        output = Path(args.output)
    else:
        root = Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))
        output = root / ((args.preset or "run") + ("-glm-off" if not cfg["glm"] else ""))
    try:
        from .state import ConfigurationError
        return run(cfg, output, args.threads)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
