"""Exact one-step transitions of the actualized equity index.

Two models are provided: Black-Scholes (geometric Brownian motion in
actualized terms) and the Minimal Market Model, a time-changed squared
Bessel process of dimension 4.  Steppers take their normal draws as
arguments so callers own the random streams.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CalibrationError, ModelDomainError


@dataclass(frozen=True)
class GbmParams:
    mu: float = 0.07
    sigma: float = 0.18
    s0: float = 1.0

    kind = "bs"

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if not self.s0 > 0:
            raise ValueError("s0 must be positive")


@dataclass(frozen=True)
class MmmParams:
    """Minimal Market Model ``dS = a_t dt + sqrt(S a_t) dW``, ``a_t = alpha0 e^{eta t}``.

    ``s0`` has no default: index level and ``alpha0`` share one unit system
    and results depend on their ratio.
    """

    s0: float
    alpha0: float = 2.317
    eta: float = 0.0542

    kind = "mmm"

    def __post_init__(self):
        if not self.alpha0 > 0:
            raise ValueError("alpha0 must be positive")
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if not self.s0 > 0:
            raise ValueError("s0 must be positive")

    def drift(self, t):
        return self.alpha0 * np.exp(self.eta * np.asarray(t, dtype=float))


def s0_matching_volatility(alpha0: float, sigma: float) -> float:
    """Index level at which the MMM's instantaneous volatility ``sqrt(alpha0/S)`` equals ``sigma``."""
    return alpha0 / sigma**2


def gbm_step(s, dt: float, p: GbmParams, r: float, z):
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0):
        raise ModelDomainError("index level must be positive")
    if dt < 0:
        raise ModelDomainError("dt must be non-negative")
    out = s * np.exp((p.mu - r - 0.5 * p.sigma**2) * dt + p.sigma * np.sqrt(dt) * np.asarray(z))
    return out if out.ndim else float(out)


def gbm_gross_returns(dt: float, p: GbmParams, r: float, z) -> np.ndarray:
    """Vectorised ``S'/S`` for an array of draws."""
    return np.exp((p.mu - r - 0.5 * p.sigma**2) * dt + p.sigma * np.sqrt(dt) * np.asarray(z))


def mmm_time_change(t, p: MmmParams):
    """Integral of ``alpha_s / 4`` over ``[0, t]``."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ModelDomainError("time must be non-negative")
    x = p.eta * t
    small = np.abs(x) < 1e-8
    # expm1 is already accurate for small x; the series keeps the eta -> 0 limit exact.
    safe_eta = p.eta if p.eta != 0 else 1.0
    out = np.where(small, p.alpha0 * t * (1.0 + 0.5 * x) / 4.0, p.alpha0 / (4.0 * safe_eta) * np.expm1(x))
    return out if out.ndim else float(out)


def mmm_step(s, t: float, dt: float, p: MmmParams, z):
    """Exact transition ``S_t -> S_{t+dt}``.

    ``z`` holds four standard normals along its last axis.  With
    ``dphi`` the time-change increment and ``lam = s/dphi`` the output is
    ``dphi * ((z1 + sqrt(lam))^2 + z2^2 + z3^2 + z4^2)``, a scaled
    non-central chi-square with 4 degrees of freedom.
    """
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ModelDomainError("index level must be non-negative")
    if dt < 0:
        raise ModelDomainError("dt must be non-negative")
    if dt == 0:
        return s if s.ndim else float(s)
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != 4:
        raise ValueError("mmm_step needs four normal draws per transition")
    dphi = mmm_time_change(t + dt, p) - mmm_time_change(t, p)
    root = np.sqrt(s / dphi)
    out = dphi * ((z[..., 0] + root) ** 2 + z[..., 1] ** 2 + z[..., 2] ** 2 + z[..., 3] ** 2)
    return out if np.ndim(out) else float(out)


def mmm_mean(s: float, t: float, dt: float, p: MmmParams) -> float:
    """Conditional mean ``E[S_{t+dt} | S_t = s]``."""
    return s + 4.0 * (mmm_time_change(t + dt, p) - mmm_time_change(t, p))


@dataclass(frozen=True)
class CalibrationResult:
    params: MmmParams
    block_times: np.ndarray
    block_rates: np.ndarray
    residual_rms: float


def calibrate_mmm(times, levels, window: float = 1.0) -> CalibrationResult:
    """Fit ``alpha0`` and ``eta`` from the quadratic variation of ``sqrt(S)``.

    Since ``d<sqrt S>_t = alpha_t/4 dt``, the realised quadratic variation
    of ``sqrt(S)`` accumulated over each window of ``window`` years gives a
    slope estimate of ``alpha_t/4``; ``log`` of those slopes is regressed on
    the window mid-times.  The returned ``s0`` is the first observation.
    """
    times = np.asarray(times, dtype=float)
    levels = np.asarray(levels, dtype=float)
    if times.shape != levels.shape or times.ndim != 1:
        raise ValueError("times and levels must be 1-d arrays of equal length")
    if len(times) < 3:
        raise ValueError("calibration needs at least 3 observations")
    if np.any(np.diff(times) <= 0):
        raise ValueError("observation dates must be increasing")
    if np.any(levels <= 0):
        raise ValueError("index levels must be strictly positive")

    increments = np.diff(np.sqrt(levels)) ** 2
    if not np.any(increments > 0):
        raise CalibrationError("zero quadratic variation")

    # Assign each increment to the window containing its start.
    rel = times[:-1] - times[0]
    block = np.floor(rel / window + 1e-12).astype(int)
    dts = np.diff(times)
    n_blocks = block.max() + 1
    qv = np.bincount(block, weights=increments, minlength=n_blocks)
    span = np.bincount(block, weights=dts, minlength=n_blocks)
    mids = np.bincount(block, weights=(times[:-1] + 0.5 * dts) * dts, minlength=n_blocks)
    keep = (qv > 0) & (span > 0)
    if keep.sum() < 2:
        raise CalibrationError("fewer than two windows with positive quadratic variation")
    rate = qv[keep] / span[keep]
    mid = mids[keep] / span[keep] - times[0]

    design = np.column_stack([np.ones_like(mid), mid])
    coef, *_ = np.linalg.lstsq(design, np.log(rate), rcond=None)
    resid = np.log(rate) - design @ coef
    alpha0 = 4.0 * np.exp(coef[0])
    eta = float(coef[1])
    if not eta > 0:
        raise CalibrationError(f"fitted growth rate {eta:.4g} is not positive")
    return CalibrationResult(
        MmmParams(s0=float(levels[0]), alpha0=float(alpha0), eta=eta),
        mid,
        rate,
        float(np.sqrt(np.mean(resid**2))),
    )


def read_index_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Read ``date_years,index_level`` rows."""
    t, s = [], []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            t.append(float(row["date_years"]))
            s.append(float(row["index_level"]))
    return np.array(t), np.array(s)
