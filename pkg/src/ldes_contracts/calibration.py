"""Calibration of a contract's free parameter to a target contracted capacity.

Every family's payoff is nondecreasing in its free parameter, so the
risk-adjusted profit at the target capacity is too. The parameter is found
by bisection on that profit, then checked by re-solving the equilibrium:
the search is grid-discretised, so the check accepts any capacity within
one grid step of the target.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .config import InvestorProfile, SystemConfig
from .contracts import (Availability, CapFloor, Contract, RevenueCfD, SpreadCfD, parameter_value,
                        template_contract, with_parameter)
from .equilibrium import (PROFIT_RTOL, EquilibriumError, EquilibriumResult, GridSpec, ProfitModel,
                          find_equilibrium, state_profit)

logger = logging.getLogger(__name__)

PARAM_XTOL = 1e-10
PROFIT_ATOL = 1e-7  # fraction of annualised fixed cost
MAX_EXPANSIONS = 30


class CalibrationError(RuntimeError):
    """Raised when no parameter in the bounds reaches the target, or when the
    response is not monotone. ``curve`` holds (parameter, profit at target)
    pairs evaluated so far."""

    def __init__(self, message: str, curve: list[tuple[float, float]] | None = None):
        super().__init__(message)
        self.curve = list(curve or [])


@dataclass
class CalibrationResult:
    contract: Contract
    iterations: int
    residual: float  # risk-adjusted profit at the target, $/MW-yr
    target: float
    equilibrium: Optional[EquilibriumResult] = None
    curve: list[tuple[float, float]] = field(default_factory=list)
    capacity_curve: list[tuple[float, float]] = field(default_factory=list)

    @property
    def parameter(self) -> float:
        return parameter_value(self.contract)

    @property
    def equilibrium_capacity(self) -> float:
        return float("nan") if self.equilibrium is None else self.equilibrium.capacity

    def verified(self, step: float) -> bool:
        return self.equilibrium is not None and abs(self.equilibrium.capacity - self.target) <= step + 1e-9

    def provenance(self) -> dict:
        return {"target_mw": self.target, "iterations": self.iterations, "residual": self.residual}


def default_bounds(contract: Contract) -> tuple[float, Optional[float]]:
    """Lower and upper parameter bounds; ``None`` means search upward by doubling."""
    if isinstance(contract, CapFloor):
        return 0.0, contract.cap_rate
    if isinstance(contract, RevenueCfD):
        return 0.0, 2.0
    if isinstance(contract, Availability):
        return 0.0, None
    return 0.0, None


def calibrate(config: SystemConfig, family: str | Contract, target: float,
              profile: Optional[InvestorProfile] = None, bounds: tuple[float, Optional[float]] | None = None,
              model: Optional[ProfitModel] = None, grid: GridSpec | None = None, cap_rate: float = 0.14,
              verify: bool = True, curve_points: int = 0) -> CalibrationResult:
    """Free parameter of ``family`` at which ``target`` MW is an equilibrium.

    Parameters
    ----------
    family
        Mechanism name (``cf``, ``rcfd``, ``scfd``, ``avc``) or a contract
        whose non-free fields are kept.
    target
        Contracted capacity in MW, strictly inside the capacity bounds.
    bounds
        Parameter search interval. An upper bound of ``None`` is found by
        doubling from 1 (or from 100 $/MWh for the spread strike).
    curve_points
        Number of evenly spaced parameters at which the equilibrium is also
        re-solved to check that capacity responds monotonically.

    Raises
    ------
    CalibrationError
        If the bounds do not bracket the target or the response is not monotone.
    """
    profile = profile or config.investor()
    model = model or ProfitModel(config, grid or GridSpec())
    tech = config.contract_tech
    F = tech.annualized_fixed_cost
    if not 0 < target <= tech.cap_max:
        raise ValueError(f"target {target} outside (0, {tech.cap_max}]")
    base = family if not isinstance(family, str) else template_contract(family, cap_rate, profile.risk_free_rate)
    lo, hi = bounds if bounds is not None else default_bounds(base)
    state = model.state(target)
    curve: list[tuple[float, float]] = []

    def rho(x: float) -> float:
        r = state_profit(config, state, with_parameter(base, x), profile)
        curve.append((float(x), float(r)))
        return r

    atol = PROFIT_ATOL * F
    r_lo = rho(lo)
    if r_lo > PROFIT_RTOL * F:
        raise CalibrationError(
            f"profit at the target is already positive ({r_lo:.3f}) at the lower bound {lo}", curve)
    if hi is None:
        hi = 100.0 if isinstance(base, SpreadCfD) else 1.0
        for _ in range(MAX_EXPANSIONS):
            if rho(hi) >= 0:
                break
            hi *= 2.0
        else:
            raise CalibrationError("no parameter reaches the target before the search limit", curve)
    r_hi = rho(hi)
    if r_hi < -PROFIT_RTOL * F:
        raise CalibrationError(f"upper bound {hi} leaves profit at the target negative ({r_hi:.3f})", curve)
    if r_hi < r_lo:
        raise CalibrationError("profit at the target decreases in the parameter", curve)

    iterations = 0
    if abs(r_lo) <= atol:
        x, r = lo, r_lo
    else:
        a, b, x, r = lo, hi, hi, r_hi
        while b - a > PARAM_XTOL * max(1.0, abs(b)) and abs(r) > atol:
            iterations += 1
            x = 0.5 * (a + b)
            r = rho(x)
            if r < 0:
                a = x
            else:
                b = x
        if r < -atol:  # settle on the side that admits the target
            x, r = b, rho(b)
    _check_monotone(curve)
    contract = with_parameter(base, float(x))
    result = CalibrationResult(contract, iterations, float(r), float(target), curve=sorted(set(curve)))

    if verify:
        hint = target if isinstance(base, RevenueCfD) else None
        result.equilibrium = find_equilibrium(config, contract, profile, target=hint, model=model)
    if curve_points > 1:
        params = np.linspace(lo, hi, curve_points)
        caps = []
        for p in params:
            try:
                eq = find_equilibrium(config, with_parameter(base, float(p)), profile, model=model)
            except EquilibriumError as exc:
                raise CalibrationError(f"equilibrium failed at parameter {p}: {exc}", curve) from exc
            caps.append((float(p), eq.capacity))
        result.capacity_curve = caps
        step = tech.cap_max / (model.grid.points - 1)
        if any(c2 < c1 - model.grid.capacity_tol for (_, c1), (_, c2) in zip(caps, caps[1:])):
            raise CalibrationError(f"equilibrium capacity is not monotone in the parameter (grid step {step})", caps)
    logger.info("calibrated %s=%.6g in %d iterations", base.parameter, x, iterations)
    return result


def _check_monotone(curve: list[tuple[float, float]]) -> None:
    pts = sorted(curve)
    for (x1, r1), (x2, r2) in zip(pts, pts[1:]):
        if x2 > x1 and r2 < r1 - 1e-9 * max(1.0, abs(r1)):
            raise CalibrationError(f"profit at the target falls between parameters {x1} and {x2}", pts)
