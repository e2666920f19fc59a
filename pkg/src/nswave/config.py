"""Run configuration files and run manifests.

Config files are plain text, one setting per line:

    # comment
    grid.points = 128
    run.dt = 1e-3
    picard.gammas = 0.25, 0.5, 0.75, 1.0

Keys are flat dotted names; each subcommand declares the keys it accepts
with their types and defaults. Reading a config resolves it against that
schema: every missing key gets its default, and a key the schema does
not list is a hard error that names the key, so a typo cannot silently
fall back to a default.

A manifest is the JSON record of one run: subcommand, fully resolved
configuration, seed, package version, thread count, wall-clock start and
end, output paths, and the pass/fail checks. It is written when the run
starts and finalized when it ends, and a finished manifest contains
everything needed to reproduce the run's artifacts byte for byte with a
single thread.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

__all__ = [
    "Option",
    "SCHEMAS",
    "parse_config_text",
    "resolve_config",
    "config_from_file",
    "RunManifest",
]


@dataclass(frozen=True)
class Option:
    """One config key: its dotted name, value type, and default.

    kind is one of int, float, str, fraction, bool, ints, floats.
    A default of None marks the key as required.
    """

    key: str
    kind: str
    default: object
    help: str = ""


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_scalar(kind: str, text: str):
    text = text.strip()
    if kind == "int":
        return int(text)
    if kind == "float":
        if text.lower() in ("inf", "infinity"):
            return float("inf")
        return float(text)
    if kind == "str":
        return text
    if kind == "bool":
        return _parse_bool(text)
    if kind == "fraction":
        return Fraction(text)
    raise ValueError(f"unknown option kind {kind!r}")


def _coerce(opt: Option, value):
    if isinstance(value, str):
        if opt.kind in ("ints", "floats"):
            parts = [p for p in value.replace(",", " ").split() if p]
            scalar = opt.kind[:-1]
            return tuple(_parse_scalar(scalar, p) for p in parts)
        return _parse_scalar(opt.kind, value)
    if opt.kind in ("ints", "floats"):
        scalar = int if opt.kind == "ints" else float
        if np.isscalar(value):
            return (scalar(value),)
        return tuple(scalar(v) for v in value)
    if opt.kind == "fraction":
        if isinstance(value, float) and not value.is_integer():
            raise ValueError(
                f"{opt.key}: wave speeds must be exact; write them as m/n")
        return Fraction(value)
    if opt.kind == "bool":
        return bool(value)
    if opt.kind == "int":
        return int(value)
    if opt.kind == "float":
        return float(value)
    return value


def _grid_options(prefix: str, default_points, default_periods,
                  default_dealias="0.6666666666666666") -> list[Option]:
    return [
        Option(f"{prefix}.points", "ints", default_points,
               "grid points per axis (one value means all axes equal)"),
        Option(f"{prefix}.periods", "floats", default_periods,
               "box period per axis (one value means all axes equal)"),
        Option(f"{prefix}.dealias", "float", default_dealias,
               "fraction of Nyquist kept after nonlinear products"),
    ]


_RUN_2D = [
    Option("run.dt", "float", "1e-3"),
    Option("run.t_final", "float", "1.0"),
    Option("run.nu", "float", "1.0"),
    Option("run.snapshot_stride", "int", "0"),
    Option("run.diag_stride", "int", "1"),
]

_IC = [
    Option("ic.kind", "str", "random",
           "taylor-green | random | file"),
    Option("ic.amplitude", "float", "1.0"),
    Option("ic.max_mode", "int", "4"),
    Option("ic.file", "str", ""),
]

SCHEMAS: dict[str, tuple[Option, ...]] = {
    "simulate2d": tuple(
        _grid_options("grid", "128", "6.283185307179586") + _RUN_2D + _IC + [
            Option("check.tol", "float", "1e-8",
                   "tolerance for the closed-form comparison when one applies"),
        ]),
    "simulate3d": tuple(
        _grid_options("grid", "32", "6.283185307179586") + _RUN_2D + _IC + [
            Option("check.div_tol", "float", "1e-12"),
        ]),
    "planewave-check": tuple(
        _grid_options("profile", "64", "6.283185307179586") + [
            Option("wave.c", "fraction", "1/2", "plane-wave speed m/n"),
            Option("wave.points3", "ints", "0",
                   "3D points per axis; 0 keeps the canonical choice"),
            Option("run.dt", "float", "1e-2"),
            Option("run.t_final", "float", "0.5"),
            Option("run.nu", "float", "1.0"),
            Option("ic.amplitude", "float", "0.5"),
            Option("ic.max_mode", "int", "4"),
            Option("check.tol", "float", "1e-6"),
        ]),
    "picard": tuple(
        _grid_options("grid", "32", "6.283185307179586") + [
            Option("run.dt", "float", "2e-3"),
            Option("run.nu", "float", "1.0"),
            Option("picard.t_star", "float", "0.5"),
            Option("picard.l_rate", "float", "0",
                   "exponential weight rate; 0 picks the default from M"),
            Option("picard.gammas", "floats", "0.25, 0.5, 0.75, 1.0"),
            Option("picard.holder_p", "float", "4.0"),
            Option("picard.max_iter", "int", "8"),
            Option("picard.eps", "float", "0.05"),
            Option("wave.c", "fraction", "1/2"),
            Option("profile.points", "ints", "0",
                   "2D profile grid; 0 derives it from the 3D grid"),
            Option("profile.amplitude", "float", "0.25"),
            Option("profile.max_mode", "int", "3"),
            Option("ic.amplitude", "float", "0.02"),
            Option("ic.max_mode", "int", "3"),
            Option("check.ratio_bound", "float", "0.6"),
            Option("check.fp_tol", "float", "1e-6"),
        ]),
    "stability": tuple(
        _grid_options("grid", "128", "25.132741228718345") + [
            Option("run.dt", "float", "0.025"),
            Option("run.diag_stride", "int", "2"),
            Option("stability.t_final", "float", "3.0"),
            Option("stability.eps", "float", "0.05"),
            Option("stability.delta", "float", "0.05"),
            Option("stability.window", "floats", "0.35, 2.45"),
            Option("stability.radius", "float", "1.5707963267948966"),
            Option("stability.core", "float", "0",
                   "layer scale; 0 means the plain bump"),
            Option("wave.c", "fraction", "1"),
            Option("profile.amplitude", "float", "0.3"),
            Option("profile.mode_band", "ints", "4, 8"),
            Option("check.p3_band", "floats", "-0.10, 0.05"),
            Option("check.p6_tol", "float", "0.10"),
            Option("check.pinf_tol", "float", "0.15"),
            Option("check.envelope_growth", "float", "1.05"),
        ]),
    "heatdecay": (
        Option("heat.qs", "ints", "2, 3, 3, 2"),
        Option("heat.ps", "floats", "inf, 3, 6, 2"),
        Option("heat.ds", "ints", "3, 3, 3, 2"),
        Option("heat.t_min", "float", "0.1"),
        Option("heat.t_max", "float", "100.0"),
        Option("heat.num", "int", "241"),
        Option("heat.sigma", "float", "0.3"),
        Option("check.flat_tol", "float", "0.01"),
    ),
    "contraction": tuple(
        _grid_options("grid", "32", "6.283185307179586") + [
            Option("run.dt", "float", "2e-3"),
            Option("contraction.t_final", "float", "0.5"),
            Option("contraction.delta", "float", "0.05"),
            Option("contraction.pairs", "int", "20"),
            Option("contraction.eps", "float", "0.02"),
            Option("contraction.max_mode", "int", "3"),
            Option("wave.c", "fraction", "1/2"),
            Option("profile.amplitude", "float", "0.25"),
            Option("profile.max_mode", "int", "3"),
            Option("check.ratio_bound", "float", "0.5"),
        ]),
    "scan": tuple(
        _grid_options("grid", "32", "6.283185307179586") + [
            Option("run.dt", "float", "2e-3"),
            Option("scan.t_final", "float", "2.0"),
            Option("scan.amplitudes", "floats", "0.05, 0.1, 0.2, 0.4, 0.8"),
            Option("scan.max_mode", "int", "4"),
            Option("scan.diag_stride", "int", "10"),
        ]),
    "cgl": tuple(
        _grid_options("grid", "64", "6.283185307179586", "0.5") + [
            Option("cgl.mode", "str", "evolve",
                   "evolve | planewave-check | stability"),
            Option("cgl.eps", "float", "0.2"),
            Option("cgl.k", "float", "1.0"),
            Option("run.dt", "float", "1e-3"),
            Option("run.t_final", "float", "0.5"),
            Option("run.snapshot_stride", "int", "0"),
            Option("run.diag_stride", "int", "1"),
            Option("ic.kind", "str", "random", "random | constant | file"),
            Option("ic.amplitude", "float", "0.3"),
            Option("ic.max_mode", "int", "2"),
            Option("ic.file", "str", ""),
            Option("wave.c", "fraction", "1/2"),
            Option("stability.eps", "float", "0.05"),
            Option("stability.delta", "float", "0.05"),
            Option("stability.t_final", "float", "2.4"),
            Option("stability.window", "floats", "0.2, 2.2"),
            Option("stability.radius", "float", "6.283185307179586"),
            Option("stability.core", "float", "0.7853981633974483"),
            Option("profile.amplitude", "float", "0.3"),
            Option("profile.mode_band", "ints", "4, 8"),
            Option("check.ode_tol", "float", "1e-8"),
            Option("check.instant_tol", "float", "1e-10"),
            Option("check.step_tol", "float", "1e-6"),
            Option("check.commute_tol", "float", "1e-6"),
            Option("check.p6_tol", "float", "0.10"),
        ]),
}


def parse_config_text(text: str) -> dict:
    """Parse `key = value` lines into a flat dict of raw strings."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value, got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ValueError(f"line {lineno}: empty key")
        if key in out:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def resolve_config(subcommand: str, raw: dict | None = None) -> dict:
    """Materialize a full config for a subcommand from raw overrides.

    Every schema key is present in the result (defaults filled in); any
    raw key the schema does not declare raises a ValueError naming it.
    """
    if subcommand not in SCHEMAS:
        raise ValueError(f"unknown subcommand {subcommand!r}")
    schema = {opt.key: opt for opt in SCHEMAS[subcommand]}
    raw = dict(raw or {})
    for key in raw:
        if key not in schema:
            raise ValueError(
                f"unknown config key {key!r} for subcommand {subcommand!r}")
    resolved = {}
    for key, opt in schema.items():
        if key in raw:
            resolved[key] = _coerce(opt, raw[key])
        else:
            if opt.default is None:
                raise ValueError(f"config key {key!r} is required")
            resolved[key] = _coerce(opt, opt.default)
    return resolved


def config_from_file(subcommand: str, path) -> dict:
    """Load a config or a finished manifest and resolve it.

    A JSON file is treated as a manifest: its resolved config is reused
    as-is (after schema validation), which is how a run is reproduced.
    """
    text = Path(path).read_text(encoding="utf-8")
    stripped = text.lstrip()
    if stripped.startswith("{"):
        doc = json.loads(text)
        raw = doc.get("config", {})
        if doc.get("subcommand") not in (None, subcommand):
            raise ValueError(
                f"manifest records subcommand {doc.get('subcommand')!r}, "
                f"not {subcommand!r}")
        return resolve_config(subcommand, _stringify(raw))
    return resolve_config(subcommand, parse_config_text(text))


def _stringify(config: dict) -> dict:
    out = {}
    for key, value in config.items():
        if isinstance(value, (list, tuple)):
            out[key] = ", ".join(str(v) for v in value)
        else:
            out[key] = str(value)
    return out


def _jsonable(value):
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}"
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, float) and np.isinf(value):
        return "inf"
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    return value


class RunManifest:
    """JSON record of one CLI run, written before and finalized after.

    The manifest on disk always reflects the latest known state: right
    after start() it records the resolved config, seed, version, threads
    and start time with status "running"; finalize() adds the end time,
    output paths, per-check results and the final status.
    """

    def __init__(self, path, subcommand: str, config: dict, seed: int,
                 threads: int, version: str):
        self.path = Path(path)
        self.doc = {
            "subcommand": subcommand,
            "config": {k: _jsonable(v) for k, v in sorted(config.items())},
            "seed": int(seed),
            "threads": int(threads),
            "version": version,
            "status": "running",
            "started_unix": None,
            "finished_unix": None,
            "outputs": [],
            "checks": [],
        }

    def start(self) -> None:
        self.doc["started_unix"] = time.time()
        self._write()

    def finalize(self, status: str, checks: list, outputs: list) -> None:
        self.doc["finished_unix"] = time.time()
        self.doc["status"] = status
        self.doc["checks"] = [
            {"name": n, "passed": bool(ok), "value": _jsonable(v)}
            for n, ok, v in checks]
        self.doc["outputs"] = [str(p) for p in outputs]
        self._write()

    def _write(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        tmp = self.path.with_suffix(".tmp")
        tmp.write_text(json.dumps(self.doc, indent=2, sort_keys=True) + "\n",
                       encoding="utf-8")
        tmp.replace(self.path)
