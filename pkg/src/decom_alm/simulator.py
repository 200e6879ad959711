"""Forward Monte-Carlo of the fund under a given strategy."""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import rng
from .dynamics import Dynamics, StepPlan, settle
from .errors import ConfigurationError
from .liability import CashflowSchedule, EconomicParams
from .market_models import GbmParams, MmmParams, gbm_gross_returns, mmm_step
from .policy import Strategy, Tabulated

# Paths are drawn in fixed-size blocks so path i always sees the same numbers.
BLOCK = 1024
SNAPSHOT_CAP = 1_000_000


@dataclass
class PTSampleSet:
    p_t: np.ndarray
    d_t: np.ndarray
    n_injections: np.ndarray
    snapshots: np.ndarray | None = None
    metadata: dict[str, Any] = field(default_factory=dict)

    def __len__(self):
        return len(self.p_t)


def portfolio_step(A, phi, gross_return):
    """Rebalanced one-period update ``A (1 + phi (R - 1))``."""
    return A * (1.0 + phi * (gross_return - 1.0))


def _block_draws(model, seed: int, block: int, n_steps: int, substeps: int) -> np.ndarray:
    shape = (BLOCK, n_steps, substeps, 4) if isinstance(model, MmmParams) else (BLOCK, n_steps, substeps)
    return rng.normals(seed, rng.DOMAIN_SIMULATE, (block,), shape)


def _run_block(model, plan: StepPlan, strategy: Strategy, seed: int, block: int, n: int, want_snapshots: bool):
    N = plan.n_steps
    substeps = plan.dynamics.substeps
    z = _block_draws(model, seed, block, N, substeps)[:n]
    A = np.full(n, plan.L0)
    D = np.zeros(n)
    S = np.full(n, model.s0)
    n_inj = np.zeros(n, dtype=np.int64)
    snaps = []
    paths = block * BLOCK + np.arange(n)
    for step in range(N):
        t = plan.times[step]
        L = plan.liability[step]
        phi = strategy.weights(t, A, D, np.full(n, L), S)
        if want_snapshots:
            snaps.append(np.column_stack([paths, np.full(n, t), (A - D) / L, phi]))
        for k in range(substeps):
            tk = t + k * plan.sub_dt
            if isinstance(model, MmmParams):
                S_next = mmm_step(S, tk, plan.sub_dt, model, z[:, step, k, :])
                gross = S_next / S
            else:
                gross = gbm_gross_returns(plan.sub_dt, model, plan.econ.r, z[:, step, k])
                S_next = S * gross
            A = portfolio_step(A, phi, gross) - plan.outflow[step, k]
            S = S_next
        A, D, inj = settle(A, D, plan.liability[step + 1], plan.constrained[step])
        n_inj += inj > 0
    p_t = A - D - plan.LT
    snap = np.concatenate(snaps) if want_snapshots else None
    return p_t, D, n_inj, snap


def simulate(
    model: GbmParams | MmmParams,
    schedule: CashflowSchedule,
    econ: EconomicParams,
    strategy: Strategy,
    n_paths: int = 50_000,
    seed: int = 0,
    dynamics: Dynamics | None = None,
    snapshots: bool = False,
    snapshot_cap: int = SNAPSHOT_CAP,
    workers: int = 1,
) -> PTSampleSet:
    """Simulate ``n_paths`` trajectories and collect terminal ``P_T``.

    Snapshots are ``(path, t, funding_ratio, phi)`` rows taken at every
    decision date; above ``snapshot_cap`` rows they are thinned to an evenly
    spaced subset.
    """
    if n_paths < 1:
        raise ConfigurationError("n_paths must be >= 1")
    dynamics = dynamics or Dynamics()
    if isinstance(strategy, Tabulated):
        if strategy.model_kind != model.kind:
            raise ConfigurationError(
                f"policy solved under model {strategy.model_kind!r} cannot drive a {model.kind!r} simulation"
            )
        table = strategy.table
        if abs(table.dynamics.step - dynamics.step) > 1e-12 or abs(table.times[-1] - econ.T) > 1e-9:
            raise ConfigurationError("solved policy time grid does not match the simulation horizon/step")
    plan = StepPlan(schedule, econ, dynamics)

    n_blocks = -(-n_paths // BLOCK)
    sizes = [min(BLOCK, n_paths - b * BLOCK) for b in range(n_blocks)]

    def work(b):
        return _run_block(model, plan, strategy, seed, b, sizes[b], snapshots)

    if workers > 1 and n_blocks > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(work, range(n_blocks)))
    else:
        parts = [work(b) for b in range(n_blocks)]

    snap = None
    if snapshots:
        snap = np.concatenate([p[3] for p in parts])
        # Order rows by (path, t) so the output is independent of blocking.
        snap = snap[np.lexsort((snap[:, 1], snap[:, 0]))]
        if len(snap) > snapshot_cap:
            keep = np.unique(np.linspace(0, len(snap) - 1, snapshot_cap).astype(np.int64))
            snap = snap[keep]
    return PTSampleSet(
        p_t=np.concatenate([p[0] for p in parts]),
        d_t=np.concatenate([p[1] for p in parts]),
        n_injections=np.concatenate([p[2] for p in parts]),
        snapshots=snap,
        metadata={
            "model": model.kind,
            "strategy": strategy.kind,
            "n_paths": n_paths,
            "seed": seed,
            "L0": plan.L0,
            "LT": plan.LT,
        },
    )


def write_samples_csv(samples: PTSampleSet, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path", "p_t", "d_t", "n_injections"])
        for i, (p, d, k) in enumerate(zip(samples.p_t, samples.d_t, samples.n_injections)):
            w.writerow([i, repr(float(p)), repr(float(d)), int(k)])


def read_samples_csv(path: str | Path) -> PTSampleSet:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return PTSampleSet(p_t=data[:, 1], d_t=data[:, 2], n_injections=data[:, 3].astype(np.int64))


def write_snapshots_csv(snapshots: np.ndarray, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path", "t", "funding_ratio", "phi"])
        for p, t, x, phi in snapshots:
            w.writerow([int(p), repr(float(t)), repr(float(x)), repr(float(phi))])


def read_snapshots_csv(path: str | Path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
