"""Repeated public goods game with conditional cooperators and behavioural mistakes.

Closed-form payoffs, stability classification and mistake-rate bands, plus a
Monte Carlo and population-dynamics oracle.
"""
__version__ = "0.1.0"

from .errors import DivergenceError, DomainError, NumericError, PGGError
from .game import (
    COOPERATE, DEFECT, EnvParams, GameParams, PopulationProfile, coop_defect_ratio,
    group_comp_pmf, mistake_pmf, oneshot_payoff, oneshot_payoff_err,
)
from .analytic import (
    DiscriminantInputs, FocalContext, d_decomposition, delta_ratio, delta_ratio_limit,
    v_err, v_errorfree, w_errorfree,
)
from .stability import (
    StabilityVerdict, SweepTable, ThresholdBand, band_ordering_report, classify,
    epsilon_star, ess_epsilon_band, min_delta_for_stability, sweep_delta_curves,
)
from .sim import (
    EpisodeConfig, SimConfig, SimTrace, drift_experiment, estimate_v, evolve, run_episode,
)
from .kernels import BACKEND
