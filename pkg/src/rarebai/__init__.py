"""Fixed-confidence best-arm identification for rare-event bandits."""

from .algorithms import (StoppingRule, SuccessiveElimination, TrackAndStop, TrialAborted, TrialReport,
                         beta, forced_exploration_shortfall, glr_statistic, load_balance,
                         run_successive_elimination, run_tsa, run_tse)
from .approx import (ApproxLowerBound, ApproxSolution, Cascade, approx_inner, approx_kl,
                     approx_mean_meeting_check, approximation_gap, poisson_kl, solve_approx_maxmin)
from .asymptotics import RegimeReport, classify, limiting_constants, verify_exponents
from .exact import (ConvergenceError, ExactLowerBound, MaxMinSolution, inner_exact, lower_bound_samples,
                    min_inner_value, solve_exact_maxmin)
from .harness import (CampaignConfig, CampaignSummary, emit, load_instance, report_lower_bound,
                      run_campaign)
from .instance import (ArmSpec, BanditInstance, EmpiricalState, RewardTape, ValidationReport, arm_mean,
                       empirical_distribution, make_rng, sample_arm, validate)
from .kinf import kinf_lower, kinf_oracle, kinf_upper

__version__ = "0.1.0"

__all__ = [
    "ApproxLowerBound",
    "ApproxSolution",
    "ArmSpec",
    "BanditInstance",
    "CampaignConfig",
    "CampaignSummary",
    "Cascade",
    "ConvergenceError",
    "EmpiricalState",
    "ExactLowerBound",
    "MaxMinSolution",
    "RegimeReport",
    "RewardTape",
    "StoppingRule",
    "SuccessiveElimination",
    "TrackAndStop",
    "TrialAborted",
    "TrialReport",
    "ValidationReport",
    "approx_inner",
    "approx_kl",
    "approx_mean_meeting_check",
    "approximation_gap",
    "arm_mean",
    "beta",
    "classify",
    "emit",
    "empirical_distribution",
    "forced_exploration_shortfall",
    "glr_statistic",
    "inner_exact",
    "kinf_lower",
    "kinf_oracle",
    "kinf_upper",
    "limiting_constants",
    "load_balance",
    "load_instance",
    "lower_bound_samples",
    "make_rng",
    "min_inner_value",
    "poisson_kl",
    "report_lower_bound",
    "run_campaign",
    "run_successive_elimination",
    "run_tsa",
    "run_tse",
    "sample_arm",
    "solve_approx_maxmin",
    "solve_exact_maxmin",
    "validate",
    "verify_exponents",
]
