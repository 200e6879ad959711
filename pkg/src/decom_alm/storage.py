"""On-disk format for solved value/policy tables.

A solve directory holds ``metadata.txt`` (``key = value`` lines, see
:data:`FORMAT_VERSION`) and one ``layer_NNN.csv`` per decision date with
columns ``A,D[,S],value,phi``.  Rows run A-major, then D, then S.  The
terminal layer has ``phi = nan``.
"""

from __future__ import annotations

from dataclasses import asdict, fields
from pathlib import Path

import numpy as np

from .dp_solver import GridSpec, ObjectiveG, SolveResult
from .dynamics import Dynamics
from .errors import ConfigurationError
from .liability import EconomicParams
from .market_models import GbmParams, MmmParams
from .policy import parse_kv

FORMAT_NAME = "decom-alm-solve"
FORMAT_VERSION = 1


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return "none"
    return str(v)


def _join(arr) -> str:
    return ",".join(repr(float(v)) for v in arr)


def save_solve(res: SolveResult, directory: str | Path) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    meta = {"format": FORMAT_NAME, "format_version": FORMAT_VERSION, "model": res.model_kind}
    meta.update({f"model.{k}": v for k, v in asdict(res.model).items()})
    meta.update({f"econ.{k}": v for k, v in asdict(res.econ).items()})
    meta.update({f"grid.{k}": v for k, v in asdict(res.grid).items()})
    meta.update({f"objective.{k}": v for k, v in asdict(res.objective).items()})
    meta.update({f"dynamics.{k}": v for k, v in asdict(res.dynamics).items()})
    meta.update(
        {
            "controls": _join(res.controls),
            "n_inner": res.n_inner,
            "seed": res.seed,
            "n_layers": len(res.values),
            "times": _join(res.times),
            "liability": _join(res.liability),
            "initial_value": float(res.initial_value),
            "clamp_rate": float(res.diagnostics.get("clamp_rate", 0.0)),
            "s_clamp_rate": float(res.diagnostics.get("s_clamp_rate", 0.0)),
            "warnings": " | ".join(res.diagnostics.get("warnings", [])),
        }
    )
    (d / "metadata.txt").write_text("".join(f"{k} = {_fmt(v)}\n" for k, v in meta.items()))

    mmm = res.s_axes is not None
    for n, table in enumerate(res.values):
        nS = table.shape[2]
        s_axis = res.s_axes[n] if mmm else np.array([np.nan])
        A, D, S = np.meshgrid(res.a_axis, res.d_axis, s_axis[:nS], indexing="ij")
        phi = res.policy[n] if n < len(res.policy) else np.full(table.shape, np.nan)
        cols = [A.ravel(), D.ravel()] + ([S.ravel()] if mmm else []) + [table.ravel(), phi.ravel()]
        header = "A,D,S,value,phi" if mmm else "A,D,value,phi"
        np.savetxt(d / f"layer_{n:03d}.csv", np.column_stack(cols), fmt="%.17g", delimiter=",", header=header, comments="")
    return d


def _floats(text: str) -> np.ndarray:
    return np.array([float(v) for v in text.split(",")]) if text else np.zeros(0)


def _typed(kv: dict[str, str], prefix: str, cls):
    kwargs = {}
    for f in fields(cls):
        raw = kv.get(f"{prefix}.{f.name}")
        if raw is None:
            continue
        if raw == "none":
            kwargs[f.name] = None
        elif f.type == "bool":
            kwargs[f.name] = raw == "true"
        elif f.type == "int":
            kwargs[f.name] = int(raw)
        else:
            kwargs[f.name] = float(raw)
    return cls(**kwargs)


def load_solve(directory: str | Path) -> SolveResult:
    d = Path(directory)
    meta_path = d / "metadata.txt"
    if not meta_path.is_file():
        raise ConfigurationError(f"{d} is not a solve directory (metadata.txt missing)")
    kv = parse_kv(meta_path.read_text())
    if kv.get("format") != FORMAT_NAME or int(kv.get("format_version", -1)) != FORMAT_VERSION:
        raise ConfigurationError(f"unsupported solve format in {d}")
    kind = kv["model"]
    model = _typed(kv, "model", MmmParams if kind == "mmm" else GbmParams)
    n_layers = int(kv["n_layers"])
    values, policy, s_axes = [], [], [] if kind == "mmm" else None
    a_axis = d_axis = None
    for n in range(n_layers):
        data = np.loadtxt(d / f"layer_{n:03d}.csv", delimiter=",", skiprows=1, ndmin=2)
        a_axis = np.unique(data[:, 0])
        d_axis = np.unique(data[:, 1])
        if kind == "mmm":
            s_axis = np.unique(data[:, 2])
            s_axes.append(s_axis)
            shape = (len(a_axis), len(d_axis), len(s_axis))
        else:
            shape = (len(a_axis), len(d_axis), 1)
        values.append(data[:, -2].reshape(shape))
        if n < n_layers - 1:
            policy.append(data[:, -1].reshape(shape))
    return SolveResult(
        model=model,
        econ=_typed(kv, "econ", EconomicParams),
        grid=_typed(kv, "grid", GridSpec),
        objective=_typed(kv, "objective", ObjectiveG),
        dynamics=_typed(kv, "dynamics", Dynamics),
        controls=_floats(kv["controls"]),
        n_inner=int(kv["n_inner"]),
        seed=int(kv["seed"]),
        times=_floats(kv["times"]),
        liability=_floats(kv["liability"]),
        a_axis=a_axis,
        d_axis=d_axis,
        s_axes=s_axes,
        values=values,
        policy=policy,
        diagnostics={
            "clamp_rate": float(kv["clamp_rate"]),
            "s_clamp_rate": float(kv["s_clamp_rate"]),
            "warnings": [w for w in kv.get("warnings", "").split(" | ") if w],
        },
    )
