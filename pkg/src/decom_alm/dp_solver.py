"""Backward dynamic programming for ``min_phi E[g(-P_T)]``.

The state ``(A, D)`` (plus the index level ``S`` under the Minimal Market
Model) is discretised on a grid.  For every node and candidate risky
fraction the one-step expectation is estimated with ``n_inner`` Monte-Carlo
draws and the next layer's values are read by multilinear interpolation.
All nodes sharing an index level see the same draws, and every control is
compared on those same draws.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any

import numba
import numpy as np

from . import rng
from ._kernels import solve_layer
from .dynamics import Dynamics, StepPlan
from .errors import ConfigurationError, PartitionError
from .liability import CashflowSchedule, EconomicParams
from .market_models import GbmParams, MmmParams, gbm_gross_returns, mmm_step

logger = logging.getLogger(__name__)

CLAMP_WARN_RATE = 0.05


@dataclass(frozen=True)
class ObjectiveG:
    """``g(x) = (y + c2 y^2 + c3 y^3) 1_{y>0}`` with ``y = x / scale``."""

    c2: float = 0.4
    c3: float = 4e-5
    scale: float = 1000.0

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("objective scale must be positive")

    def __call__(self, x):
        return g_eval(x, self)

    def check_convex(self, x_max: float) -> None:
        """Raise if ``g`` is not convex and nondecreasing on ``[0, x_max]``."""
        y = np.linspace(0.0, x_max / self.scale, 201)
        slope = 1.0 + 2.0 * self.c2 * y + 3.0 * self.c3 * y**2
        curvature = 2.0 * self.c2 + 6.0 * self.c3 * y
        if np.any(slope < 0) or np.any(curvature < 0):
            raise ValueError(f"objective {self} is not convex and nondecreasing up to {x_max:g}")


OBJECTIVE_PRESETS = {
    "g1": ObjectiveG(0.4, 0.0),
    "g2": ObjectiveG(0.4, 4e-4),
    "g3": ObjectiveG(0.4, 4e-5),
}


def g_eval(x, obj: ObjectiveG):
    y = np.asarray(x, dtype=float) / obj.scale
    pos = np.maximum(y, 0.0)
    out = np.where(y > 0, pos + obj.c2 * pos**2 + obj.c3 * pos**3, 0.0)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class GridSpec:
    """State discretisation.

    Bounds default to ``[0, a_max_factor * L0]`` and ``[0, d_max_factor * L0]``
    unless ``a_max``/``d_max`` are given in M EUR.
    """

    a_step: float = 200.0
    d_step: float = 500.0
    a_max_factor: float = 3.0
    d_max_factor: float = 1.5
    a_max: float | None = None
    d_max: float | None = None
    s_meshes: int = 100
    s_samples: int = 600_000

    def __post_init__(self):
        if not (self.a_step > 0 and self.d_step > 0):
            raise ValueError("grid steps must be positive")

    def axes(self, L0: float) -> tuple[np.ndarray, np.ndarray]:
        a_max = self.a_max if self.a_max is not None else self.a_max_factor * L0
        d_max = self.d_max if self.d_max is not None else self.d_max_factor * L0
        return _uniform_axis(a_max, self.a_step), _uniform_axis(d_max, self.d_step)


def _uniform_axis(upper: float, step: float) -> np.ndarray:
    n = max(int(np.ceil(upper / step - 1e-9)), 1) + 1
    return np.arange(n) * step


DEFAULT_CONTROLS = np.linspace(0.0, 1.0, 21)


@dataclass(frozen=True)
class SMesh:
    cuts: np.ndarray
    levels: np.ndarray
    counts: np.ndarray


def sample_index(model, t: float, n: int, seed: int, key: tuple[int, ...], r: float) -> np.ndarray:
    """Exact draws of ``S_t`` started from ``model.s0`` at time 0."""
    gen = rng.stream(seed, rng.DOMAIN_MESH, *key)
    if isinstance(model, MmmParams):
        return np.atleast_1d(mmm_step(np.full(n, model.s0), 0.0, t, model, gen.standard_normal((n, 4))))
    return model.s0 * gbm_gross_returns(t, model, r, gen.standard_normal(n))


def build_s_mesh(model, econ: EconomicParams, t: float, n_samples: int, n_meshes: int, seed: int, layer: int = 0) -> SMesh:
    """Equiprobable partition of simulated index levels at ``t``.

    Returns the cut points between adjacent cells, each cell's median as
    its representative level, and the cell occupancies.
    """
    if n_meshes < 2:
        raise ValueError("n_meshes must be >= 2")
    if n_samples < 10 * n_meshes:
        raise ValueError("n_samples must be at least 10 * n_meshes")
    x = np.sort(sample_index(model, t, n_samples, seed, (layer,), econ.r))
    if x[-1] - x[0] <= 1e-12 * max(abs(x[-1]), 1.0):
        raise PartitionError("degenerate partition: sampled index levels have no spread")
    cells = np.array_split(x, n_meshes)
    levels = np.array([np.median(c) for c in cells])
    if np.any(np.diff(levels) <= 0):
        raise PartitionError("degenerate partition: representative levels are not distinct")
    cuts = np.array([0.5 * (a[-1] + b[0]) for a, b in zip(cells[:-1], cells[1:])])
    return SMesh(cuts, levels, np.array([len(c) for c in cells]))


def inner_normals(seed: int, layer: int, s_node: int, n_inner: int, substeps: int, model) -> np.ndarray:
    """Draws used for the expectation at ``(layer, s_node)``."""
    shape = (n_inner, substeps, 4) if isinstance(model, MmmParams) else (n_inner, substeps)
    return rng.normals(seed, rng.DOMAIN_SOLVE, (layer, s_node), shape)


def step_returns(model, s: float, t: float, dt: float, r: float, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-substep gross returns ``(n, substeps)`` and end levels ``(n,)``."""
    n, substeps = z.shape[0], z.shape[1]
    if isinstance(model, MmmParams):
        level = np.full(n, float(s))
        gross = np.empty((n, substeps))
        for k in range(substeps):
            nxt = mmm_step(level, t + k * dt, dt, model, z[:, k, :])
            gross[:, k] = nxt / level
            level = nxt
        return gross, level
    gross = gbm_gross_returns(dt, model, r, z)
    return gross, s * np.prod(gross, axis=1)


def growth_and_outflow(gross: np.ndarray, controls: np.ndarray, outflow: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Affine end-of-step map ``A -> A * G - H`` for each control and draw.

    ``gross`` is ``(n, substeps)``; results are ``(n_controls, n)``.
    """
    phi = controls[:, None]
    G = np.ones((len(controls), gross.shape[0]))
    H = np.zeros_like(G)
    for k in range(gross.shape[1]):
        f = 1.0 + phi * (gross[None, :, k] - 1.0)
        G = G * f
        H = H * f + outflow[k]
    return G, H


def _locate_nonuniform(axis: np.ndarray, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if len(axis) == 1:
        return np.zeros(x.shape, dtype=np.int64), np.zeros(x.shape), np.zeros(x.shape, dtype=bool)
    clamped = (x < axis[0]) | (x > axis[-1])
    xc = np.clip(x, axis[0], axis[-1])
    i = np.clip(np.searchsorted(axis, xc, side="right") - 1, 0, len(axis) - 2)
    w = (xc - axis[i]) / (axis[i + 1] - axis[i])
    return i.astype(np.int64), w, clamped


def _locate_uniform(axis: np.ndarray, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    step = axis[1] - axis[0]
    f = np.clip((x - axis[0]) / step, 0.0, len(axis) - 1.0)
    i = np.minimum(f.astype(np.int64), len(axis) - 2)
    return i, f - i


def interpolate_layer(table: np.ndarray, a_axis, d_axis, s_axis, A, D, S=None) -> np.ndarray:
    """Multilinear interpolation of an ``(nA, nD, nS)`` table with clamping."""
    A = np.asarray(A, dtype=float)
    D = np.broadcast_to(np.asarray(D, dtype=float), A.shape)
    ia, wa = _locate_uniform(a_axis, A)
    idd, wd = _locate_uniform(d_axis, D)
    if table.shape[2] == 1 or S is None:
        js = np.zeros(A.shape, dtype=np.int64)
        ws = np.zeros(A.shape)
    else:
        js, ws, _ = _locate_nonuniform(s_axis, np.broadcast_to(np.asarray(S, dtype=float), A.shape))
    js1 = np.minimum(js + 1, table.shape[2] - 1)

    def plane(j):
        return (
            (1 - wa) * ((1 - wd) * table[ia, idd, j] + wd * table[ia, idd + 1, j])
            + wa * ((1 - wd) * table[ia + 1, idd, j] + wd * table[ia + 1, idd + 1, j])
        )

    return (1 - ws) * plane(js) + ws * plane(js1)


@dataclass
class SolveResult:
    model: GbmParams | MmmParams
    econ: EconomicParams
    grid: GridSpec
    objective: ObjectiveG
    dynamics: Dynamics
    controls: np.ndarray
    n_inner: int
    seed: int
    times: np.ndarray
    liability: np.ndarray
    a_axis: np.ndarray
    d_axis: np.ndarray
    s_axes: list[np.ndarray] | None
    values: list[np.ndarray]
    policy: list[np.ndarray]
    diagnostics: dict[str, Any] = field(default_factory=dict)

    @property
    def model_kind(self) -> str:
        return self.model.kind

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1

    def s_axis(self, n: int) -> np.ndarray | None:
        return None if self.s_axes is None else self.s_axes[n]

    def value_at(self, n: int, A, D, S=None) -> np.ndarray:
        return interpolate_layer(self.values[n], self.a_axis, self.d_axis, self.s_axis(n), A, D, S)

    def phi_at(self, t: float, A, D, S=None) -> np.ndarray:
        n = int(round(t / self.dynamics.step))
        if abs(n * self.dynamics.step - t) > 1e-9 or not 0 <= n < self.n_steps:
            raise ConfigurationError(f"t={t} is not a decision date of the solved policy")
        if self.s_axes is not None and S is None:
            raise ConfigurationError("policy solved under the MMM needs the index level")
        return interpolate_layer(self.policy[n], self.a_axis, self.d_axis, self.s_axis(n), A, D, S)

    @property
    def initial_value(self) -> float:
        S = None if self.s_axes is None else np.array([self.model.s0])
        return float(self.value_at(0, np.array([self.liability[0]]), np.array([0.0]), S)[0])


def _set_threads(workers: int) -> int:
    previous = numba.get_num_threads()
    numba.set_num_threads(max(1, min(int(workers), numba.config.NUMBA_NUM_THREADS)))
    return previous


def solve(
    model: GbmParams | MmmParams,
    schedule: CashflowSchedule,
    econ: EconomicParams,
    grid: GridSpec | None = None,
    obj: ObjectiveG | None = None,
    controls=None,
    n_inner: int = 4000,
    seed: int = 0,
    dynamics: Dynamics | None = None,
    workers: int = 1,
) -> SolveResult:
    """Backward induction from ``V_T = g(-(A - D - L_T))``.

    Args:
        model: index model; its ``s0`` anchors the MMM index axis.
        schedule: payments and constraint dates.
        econ: rates and horizon.
        grid: state discretisation.
        obj: terminal penalty.
        controls: candidate risky fractions in ``[0, 1]``.
        n_inner: Monte-Carlo draws per one-step expectation.
        seed: root of all random streams.
        dynamics: decision step, rebalancing sub-steps and payment handling.
        workers: compiled-kernel threads; results do not depend on it.
    """
    grid = grid or GridSpec()
    obj = obj or OBJECTIVE_PRESETS["g3"]
    dynamics = dynamics or Dynamics()
    controls = np.asarray(DEFAULT_CONTROLS if controls is None else controls, dtype=float)
    if controls.size == 0:
        raise ConfigurationError("control set is empty")
    if np.any(controls < 0) or np.any(controls > 1):
        raise ConfigurationError("controls must lie in [0, 1]")
    if n_inner < 1:
        raise ConfigurationError("n_inner must be >= 1")

    plan = StepPlan(schedule, econ, dynamics)
    N = plan.n_steps
    a_axis, d_axis = grid.axes(plan.L0)
    if len(a_axis) < 2 or len(d_axis) < 2:
        raise ConfigurationError("grid needs at least two nodes per axis")
    if a_axis[-1] < plan.L0:
        raise ConfigurationError(f"A axis tops out at {a_axis[-1]:g} below A0 = L0 = {plan.L0:g}")
    obj.check_convex(d_axis[-1] + plan.LT + plan.outflow.sum())

    mmm = isinstance(model, MmmParams)
    s_axes = None
    if mmm:
        s_axes = [np.array([model.s0])]
        for n in range(1, N + 1):
            mesh = build_s_mesh(model, econ, plan.times[n], grid.s_samples, grid.s_meshes, seed, layer=n)
            s_axes.append(mesh.levels)

    nA, nD = len(a_axis), len(d_axis)
    values: list[np.ndarray] = [None] * (N + 1)
    policy: list[np.ndarray] = [None] * N
    AA, DD = np.meshgrid(a_axis, d_axis, indexing="ij")
    terminal = g_eval(-(AA - DD - plan.LT), obj)
    nS_T = 1 if s_axes is None else len(s_axes[N])
    values[N] = np.repeat(terminal[:, :, None], nS_T, axis=2)

    clamp_total = 0
    interp_total = 0
    s_clamp_total = 0
    s_total = 0
    previous = _set_threads(workers)
    try:
        for n in range(N - 1, -1, -1):
            levels = np.array([model.s0]) if s_axes is None else s_axes[n]
            nS = len(levels)
            G = np.empty((nS, len(controls), n_inner))
            H = np.empty_like(G)
            s_lo = np.zeros((nS, n_inner), dtype=np.int64)
            s_w = np.zeros((nS, n_inner))
            is_terminal = n == N - 1
            for j, s in enumerate(levels):
                z = inner_normals(seed, n, j, n_inner, dynamics.substeps, model)
                gross, s_end = step_returns(model, s, plan.times[n], plan.sub_dt, econ.r, z)
                G[j], H[j] = growth_and_outflow(gross, controls, plan.outflow[n])
                if mmm and not is_terminal:
                    s_lo[j], s_w[j], clamped = _locate_nonuniform(s_axes[n + 1], s_end)
                    s_clamp_total += int(clamped.sum())
                    s_total += n_inner
            v_next = values[n + 1]
            if is_terminal:
                v_next = np.zeros((2, 2, 1))
            out_v = np.empty((nA, nD, nS))
            out_c = np.empty((nA, nD, nS), dtype=np.int64)
            out_k = np.zeros((nA, nD, nS), dtype=np.int64)
            solve_layer(
                a_axis, d_axis, np.ascontiguousarray(v_next), G, H, s_lo, s_w,
                float(plan.liability[n + 1]), bool(plan.constrained[n]), is_terminal, plan.LT,
                obj.c2, obj.c3, obj.scale, out_v, out_c, out_k,
            )
            values[n] = out_v
            policy[n] = controls[out_c]
            if not is_terminal:
                clamp_total += int(out_k.sum())
                interp_total += out_k.size * n_inner
            logger.debug("layer %d solved, min value %.6g", n, out_v.min())
    finally:
        numba.set_num_threads(previous)

    clamp_rate = clamp_total / interp_total if interp_total else 0.0
    diagnostics: dict[str, Any] = {
        "clamp_rate": clamp_rate,
        "s_clamp_rate": s_clamp_total / s_total if s_total else 0.0,
        "warnings": [],
    }
    if clamp_rate > CLAMP_WARN_RATE:
        msg = f"clamp rate {clamp_rate:.3%} exceeds {CLAMP_WARN_RATE:.0%}; widen the grid"
        diagnostics["warnings"].append(msg)
        logger.warning(msg)

    return SolveResult(
        model=model, econ=econ, grid=grid, objective=obj, dynamics=dynamics, controls=controls,
        n_inner=n_inner, seed=seed, times=plan.times, liability=plan.liability,
        a_axis=a_axis, d_axis=d_axis, s_axes=s_axes, values=values, policy=policy,
        diagnostics=diagnostics,
    )
