"""Decommissioning cash flows, discounted liability and the endowment rule.

Money is expressed in millions of euros throughout; times are in years
from the study start.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import ScheduleError

# Estimated decommissioning charges per 5-year period (M EUR).
DEFAULT_BUCKETS: tuple[tuple[int, float], ...] = (
    (2015, 200.0),
    (2020, 950.0),
    (2025, 5550.0),
    (2030, 7950.0),
    (2035, 2700.0),
    (2040, 1500.0),
    (2045, 500.0),
)

BUCKET_YEARS = 5
MONTHS_PER_YEAR = 12
CONSTRAINT_INTERVAL = 0.5

# Two times closer than this are treated as the same date.
TIME_TOL = 1e-9


@dataclass(frozen=True)
class EconomicParams:
    """Risk-free rate, inflation, long-term actualization factor and horizon."""

    r: float = 0.02
    gamma: float = 0.02
    a_L: float = 0.026
    T: float = 20.0

    def __post_init__(self):
        if not self.a_L > 0:
            raise ValueError(f"a_L must be positive, got {self.a_L}")
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T}")


@dataclass(frozen=True)
class CashflowSchedule:
    """Dated payments (the payment set) and the regulatory constraint dates."""

    times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    amounts: np.ndarray = field(default_factory=lambda: np.zeros(0))
    constraint_dates: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).reshape(-1)
        amounts = np.asarray(self.amounts, dtype=float).reshape(-1)
        dates = np.asarray(self.constraint_dates, dtype=float).reshape(-1)
        if times.shape != amounts.shape:
            raise ScheduleError("payment times and amounts differ in length")
        if np.any(np.diff(times) <= 0):
            raise ScheduleError("payment dates must be strictly increasing")
        if np.any(amounts < 0):
            raise ScheduleError("payment amounts must be non-negative")
        if np.any(np.diff(dates) <= 0):
            raise ScheduleError("constraint dates must be strictly increasing")
        for name, arr in (("times", times), ("amounts", amounts), ("constraint_dates", dates)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self):
        return len(self.times)

    @property
    def total(self) -> float:
        return float(self.amounts.sum())

    def is_constraint_date(self, t: float) -> bool:
        if len(self.constraint_dates) == 0:
            return False
        return bool(np.min(np.abs(self.constraint_dates - t)) <= TIME_TOL)

    def payments_between(self, t0: float, t1: float) -> tuple[np.ndarray, np.ndarray]:
        """Payments with t0 < t_j <= t1 as ``(times, amounts)``."""
        lo = np.searchsorted(self.times, t0 + TIME_TOL, side="right")
        hi = np.searchsorted(self.times, t1 + TIME_TOL, side="right")
        return self.times[lo:hi], self.amounts[lo:hi]

    def scaled(self, factor: float) -> "CashflowSchedule":
        return CashflowSchedule(self.times, self.amounts * factor, self.constraint_dates)


def constraint_grid(T: float, interval: float = CONSTRAINT_INTERVAL) -> np.ndarray:
    """Regularly spaced constraint dates in (0, T]."""
    n = int(np.floor(T / interval + TIME_TOL))
    return np.arange(1, n + 1) * interval


def build_schedule(
    buckets: Iterable[tuple[float, float]] = DEFAULT_BUCKETS,
    spreading: str = "uniform-monthly",
    horizon: EconomicParams | None = None,
) -> CashflowSchedule:
    """Spread 5-year bucket totals over monthly payment dates.

    The bucket labelled ``Y`` covers years ``[Y, Y+5)`` and the first
    bucket's start is the study origin, so its 60 payments fall on months
    1..60.

    Args:
        buckets: ``(label_year, total)`` pairs.
        spreading: only ``"uniform-monthly"`` is supported.
        horizon: economic parameters providing ``T`` for the constraint
            dates; defaults to :class:`EconomicParams()`.

    Raises:
        ScheduleError: on negative totals, overlapping buckets or an
            unknown spreading policy.
    """
    if spreading != "uniform-monthly":
        raise ScheduleError(f"unknown spreading policy {spreading!r}")
    horizon = horizon or EconomicParams()
    dates = constraint_grid(horizon.T)
    buckets = sorted((float(y), float(v)) for y, v in buckets)
    if not buckets:
        return CashflowSchedule(constraint_dates=dates)

    origin = buckets[0][0]
    months_per_bucket = BUCKET_YEARS * MONTHS_PER_YEAR
    times, amounts = [], []
    prev_end = -np.inf
    for year, total in buckets:
        if total < 0:
            raise ScheduleError(f"bucket {year:g} has negative total {total}")
        start = year - origin
        if start < prev_end - TIME_TOL:
            raise ScheduleError(f"bucket {year:g} overlaps the previous bucket")
        prev_end = start + BUCKET_YEARS
        first_month = int(round(start * MONTHS_PER_YEAR))
        months = first_month + np.arange(1, months_per_bucket + 1)
        times.append(months / MONTHS_PER_YEAR)
        amounts.append(np.full(months_per_bucket, total / months_per_bucket))
    return CashflowSchedule(np.concatenate(times), np.concatenate(amounts), dates)


def liability_value(s: CashflowSchedule, t, p: EconomicParams):
    """Discounted liability ``L_t`` of the payments strictly after ``t``.

    Accepts a scalar or an array of dates.
    """
    t_arr = np.asarray(t, dtype=float)
    flat = t_arr.reshape(-1)
    out = np.zeros(flat.shape)
    for i, ti in enumerate(flat):
        lo = np.searchsorted(s.times, ti + TIME_TOL, side="right")
        if lo < len(s.times):
            future = s.amounts[lo:] * np.exp(-p.a_L * (s.times[lo:] - ti))
            out[i] = np.exp((p.gamma - p.r) * ti) * future.sum()
    if t_arr.ndim == 0:
        return float(out[0])
    return out.reshape(t_arr.shape)


def payment_value(s: CashflowSchedule, t0: float, t1: float, p: EconomicParams) -> float:
    """Actualized value of the payments falling in ``(t0, t1]``."""
    times, amounts = s.payments_between(t0, t1)
    return float(np.sum(amounts * np.exp((p.gamma - p.r) * times)))


def required_endowment(A, L, is_constraint_date: bool):
    """Minimal injection restoring ``A >= L`` on a constraint date."""
    if not is_constraint_date:
        return np.zeros_like(A) if isinstance(A, np.ndarray) else 0.0
    return np.maximum(L - A, 0.0)


def read_schedule_csv(
    payments_path: str | Path,
    constraints_path: str | Path | None = None,
    horizon: EconomicParams | None = None,
) -> CashflowSchedule:
    """Load ``date_years,amount_meur`` rows and optional ``date_years`` rows.

    Without a constraint file the semiannual grid over ``(0, T]`` is used.
    """
    times, amounts = [], []
    with open(payments_path, newline="") as fh:
        for row in csv.DictReader(fh):
            times.append(float(row["date_years"]))
            amounts.append(float(row["amount_meur"]))
    if constraints_path is None:
        dates = constraint_grid((horizon or EconomicParams()).T)
    else:
        with open(constraints_path, newline="") as fh:
            dates = [float(row["date_years"]) for row in csv.DictReader(fh)]
    return CashflowSchedule(np.array(times), np.array(amounts), np.array(dates))


def write_schedule_csv(s: CashflowSchedule, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date_years", "amount_meur"])
        for t, a in zip(s.times, s.amounts):
            w.writerow([repr(float(t)), repr(float(a))])


def funding_gap_report(s: CashflowSchedule, p: EconomicParams, stated_fund: float = 23350.0) -> dict[str, float]:
    """Compare the discounted schedule with the stated initial fund size."""
    L0 = liability_value(s, 0.0, p)
    return {"L0": L0, "stated_fund": stated_fund, "ratio": stated_fund / L0 if L0 > 0 else float("nan")}

