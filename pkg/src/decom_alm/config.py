"""Run configuration: a versioned YAML key schema with defaults.

Unknown keys are rejected so typos surface as configuration errors.  The
resolved configuration written next to every output omits the execution
placement keys ``out`` and ``workers``; re-running it with any ``--out``
and ``--workers`` reproduces the outputs byte for byte.
"""

from __future__ import annotations

import copy
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .dp_solver import OBJECTIVE_PRESETS, GridSpec, ObjectiveG
from .dynamics import Dynamics
from .errors import ConfigurationError
from .liability import DEFAULT_BUCKETS, CashflowSchedule, EconomicParams, build_schedule, read_schedule_csv
from .market_models import GbmParams, MmmParams

SCHEMA_VERSION = 1

DEFAULTS: dict[str, Any] = {
    "schema_version": SCHEMA_VERSION,
    "seed": 20160101,
    "workers": 1,
    "out": "runs/default",
    "economics": {"r": 0.02, "gamma": 0.02, "a_L": 0.026, "T": 20.0},
    "schedule": {
        "source": "builtin",
        "buckets": [list(b) for b in DEFAULT_BUCKETS],
        "payments_csv": None,
        "constraints_csv": None,
    },
    "model": {
        "kind": "bs",
        "bs": {"mu": 0.07, "sigma": 0.18, "s0": 1.0},
        "mmm": {"alpha0": 2.317, "eta": 0.0542, "s0": None},
    },
    "objective": {"preset": "g3", "c2": None, "c3": None, "scale": 1000.0},
    "grid": {
        "a_step": 200.0,
        "d_step": 500.0,
        "a_max_factor": 3.0,
        "d_max_factor": 1.5,
        "a_max": None,
        "d_max": None,
        "s_meshes": 100,
        "s_samples": 600000,
    },
    "controls": {"count": 21, "values": None},
    "dynamics": {"step": 0.5, "substeps": 6, "pay_from_fund": True},
    "solver": {"n_inner": 4000},
    "simulation": {"n_paths": 50000, "snapshots": False, "snapshot_cap": 1000000},
    "strategy": {"source": "constant-mix", "weight": 0.5, "path": None},
    "report": {
        "levels": [0.01, 0.02, 0.03, 0.05, 0.1, 0.2, 0.3],
        "hist_bins": 80,
        "normalization": "reference",
        "reference_paths": 50000,
        "samples_csv": None,
    },
    "fit": {"snapshots_csv": None, "form": "quadratic"},
    "sweep": {"a_L_optimize": [0.022, 0.026, 0.03], "a_L_evaluate": 0.026},
}

EXECUTION_KEYS = ("out", "workers")
PATH_KEYS = (
    ("schedule", "payments_csv"),
    ("schedule", "constraints_csv"),
    ("strategy", "path"),
    ("report", "samples_csv"),
    ("fit", "snapshots_csv"),
)


def _merge(base: dict, override: dict, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        path = f"{where}{key}"
        if key not in base:
            raise ConfigurationError(f"unknown configuration key {path!r}")
        if isinstance(base[key], dict) and base[key]:
            if not isinstance(value, dict):
                raise ConfigurationError(f"configuration key {path!r} must be a mapping")
            out[key] = _merge(base[key], value, path + ".")
        else:
            out[key] = value
    return out


def set_dotted(cfg: dict, dotted: str, value: Any) -> None:
    keys = dotted.split(".")
    node = cfg
    for k in keys[:-1]:
        if not isinstance(node.get(k), dict):
            raise ConfigurationError(f"unknown configuration key {dotted!r}")
        node = node[k]
    if keys[-1] not in node:
        raise ConfigurationError(f"unknown configuration key {dotted!r}")
    node[keys[-1]] = value


def load(path: str | Path | None = None, overrides: dict[str, Any] | None = None) -> "RunConfig":
    """Defaults, then the YAML file, then dotted ``overrides``."""
    raw: dict[str, Any] = {}
    base_dir = Path.cwd()
    if path is not None:
        path = Path(path)
        try:
            raw = yaml.safe_load(path.read_text()) or {}
        except yaml.YAMLError as exc:
            raise ConfigurationError(f"cannot parse {path}: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigurationError(f"{path} must contain a mapping")
        base_dir = path.resolve().parent
    version = raw.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigurationError(f"unsupported schema_version {version}")
    data = _merge(DEFAULTS, raw)
    for dotted, value in (overrides or {}).items():
        set_dotted(data, dotted, value)
    for section, key in PATH_KEYS:
        value = data[section][key]
        if value is not None:
            p = Path(value).expanduser()
            data[section][key] = str(p if p.is_absolute() else (base_dir / p).resolve())
    return RunConfig(data)


class RunConfig:
    """Typed accessors over a resolved configuration mapping."""

    def __init__(self, data: dict[str, Any]):
        self.data = data

    def __getitem__(self, key):
        return self.data[key]

    @property
    def seed(self) -> int:
        return _as_int(self.data["seed"], "seed")

    @property
    def workers(self) -> int:
        return max(1, _as_int(self.data["workers"], "workers"))

    @property
    def out(self) -> Path:
        return Path(self.data["out"])

    def econ(self, a_L: float | None = None) -> EconomicParams:
        e = self.data["economics"]
        try:
            return EconomicParams(float(e["r"]), float(e["gamma"]), float(a_L if a_L is not None else e["a_L"]), float(e["T"]))
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"economics: {exc}") from None

    def schedule(self) -> CashflowSchedule:
        s = self.data["schedule"]
        econ = self.econ()
        if s["source"] == "builtin":
            return build_schedule(s["buckets"], "uniform-monthly", econ)
        if s["source"] == "csv":
            if not s["payments_csv"]:
                raise ConfigurationError("schedule.payments_csv is required when schedule.source = csv")
            return read_schedule_csv(s["payments_csv"], s["constraints_csv"], econ)
        raise ConfigurationError(f"schedule.source must be 'builtin' or 'csv', got {s['source']!r}")

    def model(self, kind: str | None = None) -> GbmParams | MmmParams:
        m = self.data["model"]
        kind = kind or m["kind"]
        try:
            if kind == "bs":
                return GbmParams(float(m["bs"]["mu"]), float(m["bs"]["sigma"]), float(m["bs"]["s0"]))
            if kind == "mmm":
                if m["mmm"]["s0"] is None:
                    raise ConfigurationError("model.mmm.s0 is required for the MMM (no default initial index level)")
                return MmmParams(float(m["mmm"]["s0"]), float(m["mmm"]["alpha0"]), float(m["mmm"]["eta"]))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigurationError):
                raise
            raise ConfigurationError(f"model.{kind}: {exc}") from None
        raise ConfigurationError(f"model.kind must be 'bs' or 'mmm', got {kind!r}")

    def objective(self) -> ObjectiveG:
        o = self.data["objective"]
        preset = o["preset"]
        if preset == "custom":
            if o["c2"] is None or o["c3"] is None:
                raise ConfigurationError("objective.c2 and objective.c3 are required for a custom objective")
            base = ObjectiveG(float(o["c2"]), float(o["c3"]))
        elif preset in OBJECTIVE_PRESETS:
            base = OBJECTIVE_PRESETS[preset]
        else:
            raise ConfigurationError(f"objective.preset must be one of g1, g2, g3, custom; got {preset!r}")
        c2 = base.c2 if o["c2"] is None else float(o["c2"])
        c3 = base.c3 if o["c3"] is None else float(o["c3"])
        try:
            return ObjectiveG(c2, c3, float(o["scale"]))
        except ValueError as exc:
            raise ConfigurationError(f"objective: {exc}") from None

    def grid(self) -> GridSpec:
        g = self.data["grid"]
        try:
            return GridSpec(
                a_step=float(g["a_step"]),
                d_step=float(g["d_step"]),
                a_max_factor=float(g["a_max_factor"]),
                d_max_factor=float(g["d_max_factor"]),
                a_max=None if g["a_max"] is None else float(g["a_max"]),
                d_max=None if g["d_max"] is None else float(g["d_max"]),
                s_meshes=_as_int(g["s_meshes"], "grid.s_meshes"),
                s_samples=_as_int(g["s_samples"], "grid.s_samples"),
            )
        except ValueError as exc:
            raise ConfigurationError(f"grid: {exc}") from None

    def controls(self) -> np.ndarray:
        c = self.data["controls"]
        if c["values"] is not None:
            values = np.asarray(c["values"], dtype=float)
        else:
            count = _as_int(c["count"], "controls.count")
            if count < 2:
                raise ConfigurationError("controls.count must be >= 2")
            values = np.linspace(0.0, 1.0, count)
        if values.size == 0 or np.any(values < 0) or np.any(values > 1):
            raise ConfigurationError("controls must be a nonempty subset of [0, 1]")
        return values

    def dynamics(self) -> Dynamics:
        d = self.data["dynamics"]
        try:
            return Dynamics(float(d["step"]), _as_int(d["substeps"], "dynamics.substeps"), bool(d["pay_from_fund"]))
        except ValueError as exc:
            raise ConfigurationError(f"dynamics: {exc}") from None

    @property
    def n_inner(self) -> int:
        return _as_int(self.data["solver"]["n_inner"], "solver.n_inner")

    @property
    def n_paths(self) -> int:
        return _as_int(self.data["simulation"]["n_paths"], "simulation.n_paths")

    def resolved(self) -> dict[str, Any]:
        return {k: v for k, v in self.data.items() if k not in EXECUTION_KEYS}

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(yaml.safe_dump(self.resolved(), sort_keys=True, default_flow_style=False))


def _as_int(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
        raise ConfigurationError(f"{name} must be an integer, got {value!r}")
    return int(value)
