"""Optimal de-risking of a nuclear decommissioning fund.

Backward dynamic programming over a discretised ``(A, D[, S])`` grid,
forward Monte-Carlo of the fund, and funding-ratio heuristics fitted to
the optimal policy.
"""

from .analytics import empirical_quantile, fit_policy, normalize, quantile_report, robustness_sweep
from .dp_solver import OBJECTIVE_PRESETS, GridSpec, ObjectiveG, SolveResult, build_s_mesh, g_eval, solve
from .dynamics import Dynamics
from .liability import CashflowSchedule, EconomicParams, build_schedule, liability_value, required_endowment
from .market_models import GbmParams, MmmParams, calibrate_mmm, gbm_step, mmm_step, mmm_time_change
from .policy import AlmState, ConstantMix, LinearQuadratic, Quadratic, Tabulated, evaluate
from .simulator import PTSampleSet, portfolio_step, simulate

__version__ = "0.1.0"
