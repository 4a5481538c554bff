"""Equilibrium simulator for contract-based support of long-duration storage."""

from .calibration import CalibrationError, CalibrationResult, calibrate
from .config import (ConfigError, DemandModel, InvestorProfile, Scenario, SystemConfig, Technology,
                     TimeGrid, load_config, validate, write_config)
from .contracts import (Availability, CapFloor, RevenueCfD, ScenarioExposure, SpreadCfD,
                        expected_mechanism_cost, payoff)
from .dispatch import build_dispatch, build_expansion, solve_dispatch, solve_problem
from .equilibrium import (EquilibriumError, EquilibriumResult, GridSpec, ProfitModel, find_equilibrium,
                          ldes_profit, risk_neutral_expansion, sweep_risk_aversion)
from .lp import SolverError
from .profiles import default_gb_config, desk_config
from .risk import CashflowDistribution, annuity_factor, cvar, implied_wacc, risk_adjusted_profit, scenario_irr

__version__ = "0.1.0"

__all__ = [
    "Availability", "CalibrationError", "CalibrationResult", "CapFloor", "CashflowDistribution",
    "ConfigError", "DemandModel", "EquilibriumError", "EquilibriumResult", "GridSpec", "InvestorProfile",
    "ProfitModel", "RevenueCfD", "Scenario", "ScenarioExposure", "SolverError", "SpreadCfD", "SystemConfig",
    "Technology", "TimeGrid", "annuity_factor", "build_dispatch", "build_expansion", "calibrate", "cvar",
    "default_gb_config", "desk_config", "expected_mechanism_cost", "find_equilibrium", "implied_wacc",
    "ldes_profit", "load_config", "payoff", "risk_adjusted_profit", "risk_neutral_expansion", "scenario_irr",
    "solve_dispatch", "solve_problem", "sweep_risk_aversion", "validate", "write_config",
]
