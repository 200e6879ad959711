"""Discrete-time portfolio mechanics shared by the solver and the simulator.

Decisions are taken on a regular grid of ``step`` years.  Inside a step the
portfolio is rebalanced to the chosen risky fraction ``substeps`` times
and decommissioning payments leave the fund at the end of the sub-step in
which they fall.  At the end of a step the endowment rule restores
``A >= L`` on constraint dates; elsewhere the fund is only topped up to
zero if payments exhausted it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .liability import TIME_TOL, CashflowSchedule, EconomicParams, liability_value, payment_value


@dataclass(frozen=True)
class Dynamics:
    step: float = 0.5
    substeps: int = 6
    pay_from_fund: bool = True

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("decision step must be positive")
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1")


class StepPlan:
    """Precomputed per-step quantities for a schedule/economy pair.

    Attributes:
        times: decision dates ``t_0 = 0 < ... < t_N = T``.
        liability: ``L`` at each decision date.
        outflow: ``(N, substeps)`` actualized payments per sub-step.
        constrained: ``(N,)`` whether step ``n`` ends on a constraint date.
    """

    def __init__(self, schedule: CashflowSchedule, econ: EconomicParams, dynamics: Dynamics):
        n_steps = int(round(econ.T / dynamics.step))
        if n_steps < 1 or abs(n_steps * dynamics.step - econ.T) > 1e-9:
            raise ConfigurationError(f"horizon T={econ.T} is not a multiple of the decision step {dynamics.step}")
        self.schedule = schedule
        self.econ = econ
        self.dynamics = dynamics
        self.n_steps = n_steps
        self.times = np.arange(n_steps + 1) * dynamics.step
        self.sub_dt = dynamics.step / dynamics.substeps
        self.liability = liability_value(schedule, self.times, econ)
        self.outflow = np.zeros((n_steps, dynamics.substeps))
        if dynamics.pay_from_fund:
            for n in range(n_steps):
                for k in range(dynamics.substeps):
                    t0 = self.times[n] + k * self.sub_dt
                    self.outflow[n, k] = payment_value(schedule, t0, t0 + self.sub_dt, econ)
        self.constrained = np.array([schedule.is_constraint_date(t) for t in self.times[1:]])

    @property
    def L0(self) -> float:
        return float(self.liability[0])

    @property
    def LT(self) -> float:
        return float(self.liability[-1])

    def layer_of(self, t: float) -> int:
        n = int(round(t / self.dynamics.step))
        if abs(n * self.dynamics.step - t) > TIME_TOL or not 0 <= n <= self.n_steps:
            raise ValueError(f"t={t} is not a decision date")
        return n


def settle(A, D, L_next: float, constrained: bool):
    """Apply the end-of-step endowment; returns ``(A, D, injection)``."""
    if constrained:
        inj = np.maximum(L_next - A, 0.0)
    else:
        inj = np.maximum(-A, 0.0)
    return A + inj, D + inj, inj
