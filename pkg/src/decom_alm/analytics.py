"""Quantile reporting, normalisation, heuristic fitting and the a_L sweep."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .dp_solver import GridSpec, ObjectiveG, SolveResult, solve
from .dynamics import Dynamics
from .errors import FittingError
from .liability import CashflowSchedule, EconomicParams
from .market_models import GbmParams
from .policy import ConstantMix, LinearQuadratic, Quadratic, Strategy, Tabulated
from .simulator import PTSampleSet, simulate

DEFAULT_LEVELS = (0.01, 0.02, 0.03, 0.05, 0.10, 0.20, 0.30)
HIST_BINS = 80


def empirical_quantile(samples, p: float) -> float:
    """Lower empirical quantile: the ``ceil(p n)``-th order statistic."""
    x = np.asarray(samples, dtype=float).reshape(-1)
    if x.size == 0:
        raise ValueError("empty sample")
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability level must lie in (0, 1), got {p}")
    # Guard against p*n landing a hair above an integer in floating point.
    k = max(int(np.ceil(p * x.size - 1e-9)), 1)
    return float(np.partition(x, k - 1)[k - 1])


def normalize(samples, reference: float) -> np.ndarray:
    if not reference > 0:
        raise ValueError(f"normalisation reference must be positive, got {reference}")
    return np.asarray(samples, dtype=float) / reference


def max_loss(samples) -> float:
    """``|min P_T|``; the constant that maps the worst loss to -1."""
    worst = float(np.min(samples))
    if worst >= 0:
        raise ValueError("sample has no loss to normalise by")
    return -worst


@dataclass
class QuantileReport:
    levels: tuple[float, ...]
    raw: np.ndarray
    normalized: np.ndarray | None
    n: int
    normalization: float | None

    def rows(self):
        for i, p in enumerate(self.levels):
            yield p, self.raw[i], None if self.normalized is None else self.normalized[i]


def quantile_report(samples, levels: Sequence[float] = DEFAULT_LEVELS, normalization: float | None = None) -> QuantileReport:
    raw = np.array([empirical_quantile(samples, p) for p in levels])
    norm = None if normalization is None else normalize(raw, normalization)
    return QuantileReport(tuple(levels), raw, norm, int(np.size(samples)), normalization)


def write_report_csv(report: QuantileReport, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["level", "raw", "normalized"])
        for p, raw, norm in report.rows():
            w.writerow([repr(float(p)), repr(float(raw)), "" if norm is None else repr(float(norm))])


def histogram(values, bins: int = HIST_BINS, value_range: tuple[float, float] | None = None):
    counts, edges = np.histogram(values, bins=bins, range=value_range)
    return edges[:-1], edges[1:], counts


def write_histogram_csv(values, path: str | Path, bins: int = HIST_BINS, value_range=None) -> None:
    left, right, counts = histogram(values, bins, value_range)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin_left", "bin_right", "count"])
        for a, b, c in zip(left, right, counts):
            w.writerow([repr(float(a)), repr(float(b)), int(c)])


@dataclass
class FitResult:
    strategy: Strategy
    coefficients: dict[str, float]
    residual_rms: float
    n: int


_DESIGNS = {
    "quadratic": ("a", "b", "c"),
    "linear-quadratic": ("a0", "a1", "b0", "b1", "c0", "c1"),
}


def _design(form: str, t: np.ndarray, x: np.ndarray) -> np.ndarray:
    if form == "quadratic":
        return np.column_stack([np.ones_like(x), x, x * x])
    if form == "linear-quadratic":
        one = np.ones_like(x)
        return np.column_stack([one, t, x, t * x, x * x, t * x * x])
    raise ValueError(f"unknown fit form {form!r}")


def fit_policy(snapshots, form: str = "quadratic") -> FitResult:
    """Ordinary least squares of ``phi`` on polynomial features of ``(t, x)``.

    Args:
        snapshots: array-like of ``(t, x, phi)`` rows.
        form: ``"quadratic"`` fits ``a + b x + c x^2``;
            ``"linear-quadratic"`` lets each coefficient vary linearly in t.

    Raises:
        FittingError: too few rows or a rank-deficient design; the message
            names the coefficient combinations the data cannot identify.
    """
    data = np.asarray(snapshots, dtype=float)
    if data.ndim != 2 or data.shape[1] != 3:
        raise ValueError("snapshots must be rows of (t, x, phi)")
    t, x, phi = data.T
    names = _DESIGNS.get(form)
    if names is None:
        raise ValueError(f"unknown fit form {form!r}")
    if len(data) < 10:
        raise FittingError(f"need at least 10 snapshots, got {len(data)}")
    X = _design(form, t, x)
    # Rank is judged on column-normalised features so units do not matter.
    norms = np.linalg.norm(X, axis=0)
    norms[norms == 0] = 1.0
    _, sv, vt = np.linalg.svd(X / norms, full_matrices=False)
    tol = sv[0] * max(X.shape) * np.finfo(float).eps * 1e3
    deficient = sv <= tol
    if np.any(deficient):
        directions = []
        for v in vt[deficient]:
            terms = [f"{v[i]:+.3g}*{names[i]}" for i in np.argsort(-np.abs(v)) if abs(v[i]) > 1e-6]
            directions.append(" ".join(terms))
        raise FittingError(f"rank-deficient {form} design; unidentified directions: " + "; ".join(directions))
    coef, *_ = np.linalg.lstsq(X, phi, rcond=None)
    resid = phi - X @ coef
    coefficients = dict(zip(names, map(float, coef)))
    cls = Quadratic if form == "quadratic" else LinearQuadratic
    return FitResult(cls(**coefficients), coefficients, float(np.sqrt(np.mean(resid**2))), len(data))


def snapshot_triples(snapshots: np.ndarray) -> np.ndarray:
    """Drop the path column of ``(path, t, x, phi)`` rows."""
    return np.asarray(snapshots)[:, 1:4]


def reference_normalization(
    schedule: CashflowSchedule,
    econ: EconomicParams,
    n_paths: int = 50_000,
    seed: int = 0,
    dynamics: Dynamics | None = None,
    workers: int = 1,
) -> float:
    """Max loss of the Black-Scholes constant-mix (50%) reference run."""
    ref = simulate(GbmParams(), schedule, econ, ConstantMix(0.5), n_paths, seed, dynamics, workers=workers)
    return max_loss(ref.p_t)


@dataclass
class PipelineResult:
    """Solve, fit a heuristic on the optimal paths, then evaluate it."""

    solve: SolveResult
    fit: FitResult
    optimal: PTSampleSet
    evaluated: PTSampleSet
    report: QuantileReport
    extra: dict[str, Any] = field(default_factory=dict)


def pipeline(
    model,
    schedule: CashflowSchedule,
    econ_optimize: EconomicParams,
    econ_evaluate: EconomicParams,
    grid: GridSpec,
    obj: ObjectiveG,
    controls,
    n_inner: int,
    n_paths: int,
    seed: int,
    dynamics: Dynamics | None = None,
    normalization: float | None = None,
    form: str = "quadratic",
    levels: Sequence[float] = DEFAULT_LEVELS,
    workers: int = 1,
) -> PipelineResult:
    dynamics = dynamics or Dynamics()
    res = solve(model, schedule, econ_optimize, grid, obj, controls, n_inner, seed, dynamics, workers)
    optimal = simulate(model, schedule, econ_optimize, Tabulated(res), n_paths, seed, dynamics, snapshots=True, workers=workers)
    fit = fit_policy(snapshot_triples(optimal.snapshots), form)
    evaluated = simulate(model, schedule, econ_evaluate, fit.strategy, n_paths, seed, dynamics, workers=workers)
    report = quantile_report(evaluated.p_t, levels, normalization)
    return PipelineResult(res, fit, optimal, evaluated, report)


@dataclass
class SweepResult:
    rates: tuple[float, ...]
    runs: list[PipelineResult]
    normalization: float | None


def robustness_sweep(
    a_L_optimize: Sequence[float],
    a_L_evaluate: float,
    model,
    schedule: CashflowSchedule,
    econ: EconomicParams,
    grid: GridSpec,
    obj: ObjectiveG,
    controls,
    n_inner: int,
    n_paths: int,
    seed: int,
    dynamics: Dynamics | None = None,
    normalization: float | None = None,
    levels: Sequence[float] = DEFAULT_LEVELS,
    workers: int = 1,
) -> SweepResult:
    """Optimise under each ``a_L`` and evaluate the fitted quadratics under one ``a_L``."""
    if any(not r > 0 for r in a_L_optimize) or not a_L_evaluate > 0:
        raise ValueError("actualization rates must be positive")
    econ_eval = replace(econ, a_L=a_L_evaluate)
    runs = [
        pipeline(
            model, schedule, replace(econ, a_L=rate), econ_eval, grid, obj, controls, n_inner,
            n_paths, seed, dynamics, normalization, "quadratic", levels, workers,
        )
        for rate in a_L_optimize
    ]
    return SweepResult(tuple(a_L_optimize), runs, normalization)
